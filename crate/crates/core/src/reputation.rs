//! Images and reputation.
//!
//! An agent `g` perceives, from its beliefs and its action model, how each
//! agent `i` regards each agent `h` ([`perceived_image`]); the image profile
//! moves toward those perceptions through the update rule `U`
//! ([`update_u`], [`image_expectation`]). Reputation ([`rep_of`]) averages
//! the images held about an agent, weighting each rater's opinion by the
//! rater's own image.

use crate::domain::{
    ActionDistribution, AgentId, BeliefMap, DomainSpec, ImageProfile, RangeError, UpdateRule,
    UpdateVariant,
};

/// `Image_g(h, i, B_g)`: how `g` perceives `i`'s image of `h`.
///
/// `delta` weights impacts on `h` due to `i` against impacts on `i` due to
/// `h`. Independent of `g`'s own state.
pub fn perceived_image(
    spec: &DomainSpec,
    h: AgentId,
    i: AgentId,
    beliefs: &BeliefMap,
    ad_g: &ActionDistribution,
    delta: f64,
) -> f64 {
    let (bh, bi) = (beliefs.of(h), beliefs.of(i));
    let mut total = 0.0;
    for sh in spec.state_ids() {
        if bh[sh.0] == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for si in spec.state_ids() {
            if bi[si.0] == 0.0 {
                continue;
            }
            let ad_i = ad_g.row(i, si);
            let ad_h = ad_g.row(h, sh);
            let mut acc = 0.0;
            for a in spec.action_ids() {
                acc += delta * ad_i[a.0] * spec.impact.get(h, sh, i, si, a)
                    + (1.0 - delta) * ad_h[a.0] * spec.impact.get(i, si, h, sh, a);
            }
            inner += bi[si.0] * acc;
        }
        total += bh[sh.0] * inner;
    }
    total
}

fn check_unit(what: &'static str, value: f64) -> Result<(), RangeError> {
    if (-1.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(RangeError { what, value })
    }
}

/// `U(α, r, i)`: new image level from the current level `r` and impact `i`.
pub fn update_u(rule: UpdateRule, r: f64, i: f64) -> Result<f64, RangeError> {
    check_unit("image level", r)?;
    check_unit("impact", i)?;
    let alpha = rule.alpha;
    let next = match rule.variant {
        UpdateVariant::Difference if i >= 0.0 => r + alpha * (1.0 - r) * i,
        UpdateVariant::Difference => r + alpha * (r + 1.0) * i,
        UpdateVariant::Saturation => r + alpha * i,
    };
    Ok(next.clamp(-1.0, 1.0))
}

/// `IE(g, Img_g, α, B_g)`: applies `U` to every ordered pair of agents.
///
/// The rule variant comes from the spec; `alpha` overrides its learning
/// rate. Perceived images are clamped to `[-1, 1]` before the update so
/// that belief rows within tolerance of 1 cannot push them out of range.
pub fn image_expectation(
    spec: &DomainSpec,
    img: &ImageProfile,
    alpha: f64,
    beliefs: &BeliefMap,
    ad_g: &ActionDistribution,
) -> ImageProfile {
    let rule = UpdateRule {
        alpha,
        ..spec.update_rule
    };
    let delta = spec.hyper.delta;
    let mut next = img.clone();
    for h in spec.agent_ids() {
        for i in spec.agent_ids() {
            let perceived = perceived_image(spec, h, i, beliefs, ad_g, delta).clamp(-1.0, 1.0);
            let level = update_u(rule, img.get(h, i), perceived)
                .expect("image profile entries are validated to lie in [-1, 1]");
            next.set(h, i, level);
        }
    }
    next
}

/// `RepOf_g(h)`: `g`'s estimate of `h`'s reputation.
///
/// `(1/|G|) [Img(h, g) + Σ_{i≠g} Img(h, i)·Img(i, g)]`
pub fn rep_of(g: AgentId, h: AgentId, img: &ImageProfile) -> f64 {
    let n = img.agents();
    let mut sum = img.get(h, g);
    for i in (0..n).map(AgentId).filter(|&i| i != g) {
        sum += img.get(h, i) * img.get(i, g);
    }
    (sum / n as f64).clamp(-1.0, 1.0)
}

/// `RepOf_g(h)` for every `h`.
pub fn reputations(g: AgentId, img: &ImageProfile) -> Vec<f64> {
    (0..img.agents())
        .map(|h| rep_of(g, AgentId(h), img))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{parse_spec, ActionId, StateId};
    use crate::oracle::naive;
    use proptest::prelude::*;

    const NOISY: &str = include_str!("../../../domains/noisy_sensor.json");

    fn diff(alpha: f64) -> UpdateRule {
        UpdateRule {
            variant: UpdateVariant::Difference,
            alpha,
        }
    }

    fn sat(alpha: f64) -> UpdateRule {
        UpdateRule {
            variant: UpdateVariant::Saturation,
            alpha,
        }
    }

    #[test]
    fn difference_update_worked_values() {
        let cases = [(1.0, 0.5), (0.5, 0.25), (-0.5, -0.25), (-1.0, -0.5)];
        for (i, want) in cases {
            assert!((update_u(diff(0.5), 0.0, i).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_impact_is_identity() {
        for r in [-1.0, -0.4, 0.0, 0.3, 1.0] {
            assert_eq!(update_u(diff(0.7), r, 0.0).unwrap(), r);
            assert_eq!(update_u(sat(0.7), r, 0.0).unwrap(), r);
        }
    }

    #[test]
    fn saturation_scenarios() {
        let run = |ups: usize| {
            let mut r = 0.0;
            for _ in 0..ups {
                r = update_u(sat(0.5), r, 1.0).unwrap();
            }
            assert_eq!(r, 1.0);
            for _ in 0..2 {
                r = update_u(sat(0.5), r, -1.0).unwrap();
            }
            r
        };
        assert_eq!(run(50), 0.0);
        assert_eq!(run(4), 0.0);
    }

    #[test]
    fn update_rejects_out_of_range() {
        assert!(update_u(diff(0.5), 1.2, 0.0).is_err());
        assert!(update_u(diff(0.5), 0.0, -1.5).is_err());
    }

    #[test]
    fn rep_of_sign_products() {
        let table = [
            (-0.5, -0.5, 0.25),
            (0.0, -0.5, 0.0),
            (0.5, -0.5, -0.25),
            (-0.5, 0.0, 0.0),
            (0.0, 0.0, 0.0),
            (0.5, 0.0, 0.0),
            (-0.5, 0.5, -0.25),
            (0.0, 0.5, 0.0),
            (0.5, 0.5, 0.25),
        ];
        let (g, h, i) = (AgentId(0), AgentId(1), AgentId(2));
        for (hi, ig, product) in table {
            let mut img = ImageProfile::zeros(3);
            img.set(h, i, hi);
            img.set(i, g, ig);
            // only the i-term survives: rep = product / 3
            assert_eq!(rep_of(g, h, &img) * 3.0, product);
        }
    }

    #[test]
    fn rep_of_three_agents() {
        let (g, h, i) = (AgentId(0), AgentId(1), AgentId(2));
        let mut img = ImageProfile::zeros(3);
        img.set(h, g, 0.5);
        img.set(h, i, 0.5);
        img.set(i, g, 0.5);
        assert!((rep_of(g, h, &img) - 0.25).abs() < 1e-15);
        assert_eq!(rep_of(g, h, &ImageProfile::zeros(3)), 0.0);
    }

    #[test]
    fn perceived_image_zero_impacts() {
        let mut spec = parse_spec(NOISY).unwrap();
        spec.impact.scale(0.0);
        let v = &spec.initial_views[0];
        assert_eq!(
            perceived_image(&spec, AgentId(0), AgentId(1), &v.beliefs, &v.ad, 0.5),
            0.0
        );
    }

    #[test]
    fn perceived_image_point_masses() {
        let spec = parse_spec(NOISY).unwrap();
        let beliefs = BeliefMap(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let ad = ActionDistribution(vec![vec![vec![0.0, 0.0, 1.0]; 2]; 2]);
        // δ = 1: I(h = bob, left, i = alice, left, nudge_bob)
        let v = perceived_image(&spec, AgentId(1), AgentId(0), &beliefs, &ad, 1.0);
        let want = spec
            .impact
            .get(AgentId(1), StateId(0), AgentId(0), StateId(0), ActionId(2));
        assert_eq!(v, want);
        assert_eq!(v, 0.5);
    }

    #[test]
    fn perceived_image_matches_quadruple_sum() {
        let spec = parse_spec(NOISY).unwrap();
        let v = &spec.initial_views[1];
        for h in spec.agent_ids() {
            for i in spec.agent_ids() {
                let got = perceived_image(&spec, h, i, &v.beliefs, &v.ad, 0.5);
                let want = naive::perceived_image(&spec, h, i, &v.beliefs, &v.ad, 0.5);
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn image_expectation_composes_oracles() {
        let spec = parse_spec(NOISY).unwrap();
        let v = &spec.initial_views[0];
        let next = image_expectation(&spec, &v.img, 0.3, &v.beliefs, &v.ad);
        let want = naive::image_expectation(&spec, &v.img, 0.3, &v.beliefs, &v.ad);
        for h in 0..2 {
            for i in 0..2 {
                assert!((next.0[h][i] - want.0[h][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn image_expectation_zero_impacts_is_identity() {
        let mut spec = parse_spec(NOISY).unwrap();
        spec.impact.scale(0.0);
        let v = &spec.initial_views[0];
        assert_eq!(
            image_expectation(&spec, &v.img, 0.9, &v.beliefs, &v.ad),
            v.img
        );
    }

    #[test]
    fn image_expectation_single_agent() {
        let spec = crate::generate::single_agent_example();
        let v = &spec.initial_views[0];
        let next = image_expectation(&spec, &v.img, 0.5, &v.beliefs, &v.ad);
        assert_eq!(next.agents(), 1);
        let p = perceived_image(
            &spec,
            AgentId(0),
            AgentId(0),
            &v.beliefs,
            &v.ad,
            spec.hyper.delta,
        );
        assert_eq!(
            next.0[0][0],
            update_u(
                UpdateRule {
                    alpha: 0.5,
                    ..spec.update_rule
                },
                v.img.0[0][0],
                p
            )
            .unwrap()
        );
    }

    proptest! {
        #[test]
        fn update_stays_in_range(alpha in 0.0..=1.0f64, r in -1.0..=1.0f64, i in -1.0..=1.0f64) {
            for rule in [diff(alpha), sat(alpha)] {
                let v = update_u(rule, r, i).unwrap();
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn difference_is_monotone(alpha in 0.0..=1.0f64, r in -1.0..=1.0f64, i1 in -1.0..=1.0f64, i2 in -1.0..=1.0f64) {
            let (lo, hi) = if i1 <= i2 { (i1, i2) } else { (i2, i1) };
            prop_assert!(update_u(diff(alpha), r, lo).unwrap() <= update_u(diff(alpha), r, hi).unwrap() + 1e-15);
            let (r_lo, r_hi) = (r.min(lo), r.max(lo));
            prop_assert!(update_u(diff(alpha), r_lo, i1).unwrap() <= update_u(diff(alpha), r_hi, i1).unwrap() + 1e-15);
        }

        #[test]
        fn rep_of_bounded_and_permutation_invariant(
            vals in proptest::collection::vec(-1.0..=1.0f64, 16),
            g in 0usize..4, h in 0usize..4,
        ) {
            let img = ImageProfile(vals.chunks(4).map(|c| c.to_vec()).collect());
            let r = rep_of(AgentId(g), AgentId(h), &img);
            prop_assert!(r.abs() <= 1.0);
            // swap the labels of the two non-g agents other than h, where possible
            let others: Vec<usize> = (0..4).filter(|&x| x != g && x != h).collect();
            if others.len() >= 2 {
                let (x, y) = (others[0], others[1]);
                let perm = |k: usize| if k == x { y } else if k == y { x } else { k };
                let swapped = ImageProfile((0..4).map(|a| (0..4).map(|b| img.0[perm(a)][perm(b)]).collect()).collect());
                let r2 = rep_of(AgentId(g), AgentId(h), &swapped);
                prop_assert!((r - r2).abs() < 1e-15);
            }
        }

        #[test]
        fn perceived_image_is_linear_in_impacts(c in -1.0..=1.0f64) {
            let spec = parse_spec(NOISY).unwrap();
            let mut scaled = spec.clone();
            scaled.impact.scale(c);
            let v = &spec.initial_views[0];
            for h in spec.agent_ids() {
                for i in spec.agent_ids() {
                    let base = perceived_image(&spec, h, i, &v.beliefs, &v.ad, 0.3);
                    let got = perceived_image(&scaled, h, i, &v.beliefs, &v.ad, 0.3);
                    prop_assert!((got - c * base).abs() < 1e-12);
                }
            }
        }
    }
}
