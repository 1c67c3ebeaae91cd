//! Property tests over parsing, rewards, advantages, geometry and matching.

use proptest::prelude::*;
use spatial_core::geometry::{backproject, box_iou_2d, project, AxisAlignedBox2, CameraIntrinsics, Point2};
use spatial_core::qa::{KeyStep, KeyStepValue, PerceptionType};
use spatial_core::reward::{group_advantages, parse_response, total_reward, GroundTruthAnnotation};
use spatial_core::scene::{match_boxes_bidirectional, LabeledBox};
use spatial_core::Thresholds;

fn gt() -> GroundTruthAnnotation {
    GroundTruthAnnotation {
        point: [320.0, 240.0],
        width: 640,
        height: 480,
        key_steps: vec![KeyStep::position("the mug", [0.5, 0.5]), KeyStep::size("the mug", 0.12)],
    }
}

// Reference grammar for well-formed responses.
fn target() -> impl Strategy<Value = String> {
    "[a-z]{1,8}( [a-z]{1,8}){0,3}".prop_map(|s| format!("the {s}"))
}

fn unit3() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 0.01)
        .prop_map(|(x, y, z)| {
            let n = (x * x + y * y + z * z).sqrt();
            (x / n, y / n, z / n)
        })
}

#[derive(Clone, Debug)]
enum Step {
    Position(String, f64, f64),
    Orientation(String, (f64, f64, f64)),
    Size(String, f64),
}

impl Step {
    fn line(&self) -> String {
        match self {
            Step::Position(t, x, y) => format!("[Position] [{t}]: [({x:.3}, {y:.3})]"),
            Step::Orientation(t, (x, y, z)) => format!("[Orientation] [{t}]: ({x:.3}, {y:.3}, {z:.3})"),
            Step::Size(t, m) => format!("[Size] [{t}]: {m:.3}"),
        }
    }
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (target(), 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(t, x, y)| Step::Position(t, x, y)),
        (target(), unit3()).prop_map(|(t, v)| Step::Orientation(t, v)),
        (target(), 0.001f64..5.0).prop_map(|(t, m)| Step::Size(t, m)),
    ]
}

fn well_formed() -> impl Strategy<Value = (String, usize, (f64, f64))> {
    (
        prop::collection::vec(step(), 1..6),
        "[A-Za-z ,.]{0,40}",
        0.0f64..=1.0,
        0.0f64..=1.0,
    )
        .prop_map(|(steps, prose, x, y)| {
            let think = std::iter::once(prose)
                .chain(steps.iter().map(Step::line))
                .collect::<Vec<_>>()
                .join("\n");
            (
                format!("<think>{think}</think>\n<answer>({x:.3}, {y:.3})</answer>"),
                steps.len(),
                (x, y),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parser_is_total(text in ".{0,300}") {
        let p = parse_response(&text);
        if p.flags.outcome_format_ok {
            prop_assert!(p.think_text.is_some() && p.answer_text.is_some());
        }
        if p.flags.process_format_ok {
            prop_assert!(!p.steps.is_empty() && p.steps.iter().all(|s| s.step.is_some()));
        }
        let b = total_reward(&p, &gt(), 0.25, &Thresholds::default()).unwrap();
        prop_assert!((0.0..=2.5).contains(&b.total));
    }

    #[test]
    fn parser_accepts_the_grammar((text, n, (x, y)) in well_formed()) {
        let p = parse_response(&text);
        prop_assert!(p.flags.outcome_format_ok);
        prop_assert!(p.flags.process_format_ok);
        prop_assert_eq!(p.steps.len(), n);
        let rx: f64 = format!("{x:.3}").parse().unwrap();
        let ry: f64 = format!("{y:.3}").parse().unwrap();
        prop_assert_eq!(p.final_point, Some(Point2::Normalized { x: rx, y: ry }));
    }

    #[test]
    fn parsed_steps_round_trip(s in step()) {
        let p = parse_response(&format!("<think>{}</think><answer>(0.1, 0.1)</answer>", s.line()));
        let got = p.steps[0].step.clone().expect("grammar step parses");
        let r = |x: &f64| -> f64 { format!("{x:.3}").parse().unwrap() };
        let (kind, target, value) = match &s {
            Step::Position(t, x, y) => (PerceptionType::Position, t, KeyStepValue::Point([r(x), r(y)])),
            Step::Orientation(t, (x, y, z)) => (PerceptionType::Orientation, t, KeyStepValue::Vector([r(x), r(y), r(z)])),
            Step::Size(t, m) => (PerceptionType::Size, t, KeyStepValue::Meters(r(m))),
        };
        prop_assert_eq!(got.perception_type, kind);
        prop_assert_eq!(&got.target_text, target);
        prop_assert_eq!(got.value, value);
    }

    /// Moving the answer closer to the target never loses the point reward,
    /// and a larger weight never lowers the total.
    #[test]
    fn rewards_are_monotone(u in 0.0f64..640.0, v in 0.0f64..480.0, k in 0.0f64..1.0, a in 0.0f64..2.0, da in 0.0f64..2.0) {
        let t = Thresholds::default();
        let g = gt();
        let at = |u: f64, v: f64| {
            let mut p = parse_response("<think>[Size] [the mug]: 0.12</think><answer>pending</answer>");
            p.final_point = Some(Point2::pixel(u, v));
            p
        };
        let far = at(u, v);
        let near = at(320.0 + (u - 320.0) * k, 240.0 + (v - 240.0) * k);
        let rf = total_reward(&far, &g, a, &t).unwrap();
        let rn = total_reward(&near, &g, a, &t).unwrap();
        prop_assert!(rn.r_p >= rf.r_p);
        let heavier = total_reward(&far, &g, a + da, &t).unwrap();
        prop_assert!(heavier.total >= rf.total);
    }

    #[test]
    fn advantages_are_affine_invariant(
        r in prop::collection::vec(-10.0f64..10.0, 2..64),
        scale in 0.01f64..100.0,
        shift in -1e3f64..1e3,
    ) {
        let a = group_advantages(&r).unwrap();
        let b = group_advantages(&r.iter().map(|x| scale * x + shift).collect::<Vec<_>>()).unwrap();
        let spread = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - r.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-6);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
        }
        // order preserved
        for i in 0..r.len() {
            for j in 0..r.len() {
                if r[i] < r[j] {
                    prop_assert!(a[i] < a[j]);
                }
            }
        }
    }

    #[test]
    fn projection_round_trips(u in 0.0f64..639.0, v in 0.0f64..479.0, z in 0.05f64..50.0, f in 100.0f64..2000.0) {
        let k = CameraIntrinsics::new(f, f * 1.1, 320.0, 240.0, 640, 480).unwrap();
        let p = backproject(u, v, z, &k).unwrap();
        let (u2, v2) = project(&p, &k).unwrap();
        prop_assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
        prop_assert!((p.z - z).abs() < 1e-12);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in (0.0f64..50.0, 0.0f64..50.0, 1.0f64..50.0, 1.0f64..50.0), b in (0.0f64..50.0, 0.0f64..50.0, 1.0f64..50.0, 1.0f64..50.0)) {
        let bx = |(x, y, w, h): (f64, f64, f64, f64)| AxisAlignedBox2::new(x, y, x + w, y + h).unwrap();
        let (ba, bb) = (bx(a), bx(b));
        let i = box_iou_2d(&ba, &bb);
        prop_assert!((0.0..=1.0).contains(&i));
        prop_assert_eq!(i, box_iou_2d(&bb, &ba));
        prop_assert!((box_iou_2d(&ba, &ba) - 1.0).abs() < 1e-12);
    }

    /// Raising the IoU bar can only remove pairs.
    #[test]
    fn matching_is_monotone_in_threshold(
        boxes in prop::collection::vec((0.0f64..40.0, 0.0f64..40.0, 2.0f64..30.0, 2.0f64..30.0), 0..16),
        split in 0usize..16,
        lo in 0.05f64..0.5,
        dhi in 0.0f64..0.5,
    ) {
        let split = split.min(boxes.len());
        let lb = |p: &str, v: &[(f64, f64, f64, f64)]| -> Vec<LabeledBox> {
            v.iter().enumerate().map(|(i, (x, y, w, h))| {
                LabeledBox::new(format!("{p}{i}"), AxisAlignedBox2::new(*x, *y, x + w, y + h).unwrap())
            }).collect()
        };
        let (r, p) = (lb("r", &boxes[..split]), lb("p", &boxes[split..]));
        let hi = (lo + dhi).min(1.0);
        let loose = match_boxes_bidirectional(&r, &p, lo).unwrap();
        let strict = match_boxes_bidirectional(&r, &p, hi).unwrap();
        for pair in &strict.pairs {
            prop_assert!(pair.iou >= hi);
            prop_assert!(loose.pairs.contains(pair), "{:?} only at the higher bar", pair);
        }
    }
}

#[test]
fn grammar_values_are_typed() {
    let p = parse_response("<think>[Size] [the mug]: 0.120 m\n[Orientation] [the mug]: (0.000, 0.000, 1.000)</think><answer>(0.5, 0.5)</answer>");
    let values: Vec<KeyStepValue> = p.steps.iter().map(|s| s.step.as_ref().unwrap().value).collect();
    assert_eq!(
        values,
        vec![KeyStepValue::Meters(0.12), KeyStepValue::Vector([0.0, 0.0, 1.0])]
    );
}
