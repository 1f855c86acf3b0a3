//! One agent's full model update after acting and observing.
//!
//! Beliefs go through [`bse_tolerant`], images through
//! [`image_expectation`] and action distributions through [`ade`]; all three
//! read the pre-step view. The planner and the simulator share this
//! function so that look-ahead and execution apply identical updates.

use crate::domain::{ActionId, AgentId, AgentView, DomainSpec, ImageProfile, ObsId, RangeError};
use crate::dynamics::bse_tolerant;
use crate::learning::{ade, ZeroLikelihood};
use crate::reputation::image_expectation;

#[derive(Debug, Clone, PartialEq)]
pub struct Advanced {
    pub view: AgentView,
    pub zero_likelihood: Vec<ZeroLikelihood>,
    /// Agents whose belief kept its prior because the observation was
    /// impossible under `g`'s model of them.
    pub stale_beliefs: Vec<AgentId>,
}

/// The image profile after one step. Depends only on the pre-step view,
/// not on the action taken or the observation.
pub fn next_images(spec: &DomainSpec, view: &AgentView) -> ImageProfile {
    image_expectation(
        spec,
        &view.img,
        spec.update_rule.alpha,
        &view.beliefs,
        &view.ad,
    )
}

pub fn advance(
    spec: &DomainSpec,
    view: &AgentView,
    a: ActionId,
    o: ObsId,
) -> Result<Advanced, RangeError> {
    advance_with_images(spec, view, a, o, next_images(spec, view))
}

/// [`advance`] with the image update precomputed by [`next_images`].
pub fn advance_with_images(
    spec: &DomainSpec,
    view: &AgentView,
    a: ActionId,
    o: ObsId,
    img: ImageProfile,
) -> Result<Advanced, RangeError> {
    let g = view.owner;
    let (beliefs, stale_beliefs) = bse_tolerant(spec, g, a, o, view)?;
    let learned = ade(spec, g, o, &view.ad, &view.img)?;
    Ok(Advanced {
        view: AgentView {
            owner: g,
            ad: learned.ad,
            img,
            beliefs,
        },
        zero_likelihood: learned.zero_likelihood,
        stale_beliefs,
    })
}
