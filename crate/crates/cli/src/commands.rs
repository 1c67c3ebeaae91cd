use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use spatial_core::eval::{benchmark_success_rate, load_masks, BenchmarkSample, PointSpace, Prediction};
use spatial_core::freespace::{self, FreeSpaceQuery, FreeSpaceRelation};
use spatial_core::geometry::Mask;
use spatial_core::qa::{
    answer_mask, generate_spatial_qa, placement_regions, Answer, Family, QAPair, QaConfig, QaContext,
};
use spatial_core::reward::{score_batch, GroundTruthAnnotation, GroundTruthRecord, Grouping, ResponseRecord};
use spatial_core::scene::io::resolve_ref;
use spatial_core::scene::{build_scene_graph, SpatialRelationKind};
use spatial_core::synth::{generate_scene, SynthConfig};
use spatial_core::{Error, Thresholds};

use crate::files::{ensure_dir, io_err, jsonl, load_with_depth, read_rows, scene_paths, write_atomic, LoadedScene};
use crate::Unsatisfiable;

pub fn build_graph(scene: &Path, out: &Path, relations: &[String], t: &Thresholds) -> anyhow::Result<()> {
    let s = load_with_depth(scene)?;
    let kinds: Vec<SpatialRelationKind> = if relations.is_empty() {
        SpatialRelationKind::ALL.to_vec()
    } else {
        relations.iter().map(|r| r.trim().parse()).collect::<Result<_, _>>()?
    };
    let graph = build_scene_graph(&s.frame, &kinds, t)?;
    let mut text = graph.to_json();
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    println!(
        "{}: {} nodes, {} edges",
        s.frame.frame_id,
        graph.nodes.len(),
        graph.edges.len()
    );
    Ok(())
}

pub fn sample_free_space(
    scene: &Path,
    relation: &str,
    targets: &[String],
    seed: u64,
    out: &Path,
    t: &Thresholds,
) -> anyhow::Result<()> {
    let s = load_with_depth(scene)?;
    let relation: FreeSpaceRelation = relation.trim().parse()?;
    let ids: Vec<&str> = targets.iter().map(|x| x.trim()).collect();
    let region = freespace::sample_free_space(&s.frame, &s.depth, &FreeSpaceQuery::new(relation, &ids, seed), t)?;
    let k = &s.frame.intrinsics;
    let mut text = serde_json::to_string_pretty(&region.to_json(k.width, k.height))?;
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    match (&region.rejection, region.selected_point) {
        (None, Some((u, v))) => {
            println!("{relation} {}: placement at ({u:.1}, {v:.1}) px", ids.join(","));
            Ok(())
        }
        (reason, _) => Err(Unsatisfiable(format!(
            "{relation} {}: no placement ({})",
            ids.join(","),
            reason
                .as_ref()
                .map_or("no visible point".to_string(), ToString::to_string)
        ))
        .into()),
    }
}

pub struct GenQaArgs {
    pub scenes: Vec<PathBuf>,
    pub scenes_dir: Option<PathBuf>,
    pub families: Vec<String>,
    pub seed: u64,
    pub per_family: usize,
    pub out: PathBuf,
    pub bench_out: Option<PathBuf>,
}

#[derive(Default)]
struct Bench {
    samples: Vec<BenchmarkSample>,
    truths: Vec<GroundTruthRecord>,
    references: Vec<Prediction>,
    masks: Vec<(String, Mask)>,
    /// Point items left out for lack of an answer mask.
    dropped: usize,
}

fn object_masks(s: &LoadedScene) -> anyhow::Result<BTreeMap<String, Mask>> {
    let mut out = BTreeMap::new();
    for o in &s.frame.objects {
        if let Some(r) = &o.mask_ref {
            out.insert(o.id.clone(), Mask::load(&resolve_ref(&s.path, r))?);
        }
    }
    Ok(out)
}

fn add_to_bench(
    bench: &mut Bench,
    ctx: &QaContext<'_>,
    qa: &QAPair,
    masks: &BTreeMap<String, Mask>,
) -> anyhow::Result<()> {
    let (Some(subset), Answer::Point2d(p)) = (qa.subset(), &qa.answer) else {
        return Ok(());
    };
    let mask = match answer_mask(ctx, qa, masks)? {
        Some(m) if !m.is_empty() => m,
        _ => {
            bench.dropped += 1;
            return Ok(());
        }
    };
    let (w, h) = (ctx.frame.intrinsics.width, ctx.frame.intrinsics.height);
    bench.samples.push(BenchmarkSample {
        sample_id: qa.qa_id.clone(),
        image_ref: qa.image_ref.clone(),
        mask_ref: format!("masks/{}.png", qa.qa_id),
        instruction: qa.question.clone(),
        constraints: qa.constraints.clone(),
        step: qa.step_count,
        subset,
    });
    bench.truths.push(GroundTruthRecord {
        sample_id: qa.qa_id.clone(),
        annotation: GroundTruthAnnotation {
            point: [p[0] * f64::from(w), p[1] * f64::from(h)],
            width: w,
            height: h,
            key_steps: qa.reasoning.clone(),
        },
    });
    bench.references.push(Prediction {
        sample_id: qa.qa_id.clone(),
        points: vec![*p],
        space: PointSpace::Normalized,
    });
    bench.masks.push((qa.qa_id.clone(), mask));
    Ok(())
}

fn write_bench(dir: &Path, bench: &Bench) -> anyhow::Result<()> {
    let masks = dir.join("masks");
    ensure_dir(&masks)?;
    for (id, m) in &bench.masks {
        write_atomic(&masks.join(format!("{id}.png")), &m.encode_png())?;
    }
    write_atomic(&dir.join("benchmark.jsonl"), jsonl(&bench.samples)?.as_bytes())?;
    write_atomic(&dir.join("ground_truth.jsonl"), jsonl(&bench.truths)?.as_bytes())?;
    write_atomic(
        &dir.join("reference_predictions.jsonl"),
        jsonl(&bench.references)?.as_bytes(),
    )?;
    Ok(())
}

pub fn gen_qa(args: &GenQaArgs, t: &Thresholds) -> anyhow::Result<()> {
    let paths = scene_paths(&args.scenes, args.scenes_dir.as_deref())?;
    let families: Vec<Family> = if args.families.is_empty() {
        Family::ALL.to_vec()
    } else {
        args.families
            .iter()
            .map(|f| f.trim().parse())
            .collect::<Result<_, _>>()?
    };
    if args.per_family == 0 {
        return Err(Error::Usage("--per-family must be at least 1".into()).into());
    }
    let cfg = QaConfig {
        families: families.clone(),
        per_family: args.per_family,
    };
    let needs_regions = families
        .iter()
        .any(|f| matches!(f, Family::Placement | Family::Between | Family::Reasoning));

    let mut pairs = Vec::new();
    let mut counts: BTreeMap<Family, usize> = families.iter().map(|f| (*f, 0)).collect();
    let mut reasons: BTreeMap<Family, String> = BTreeMap::new();
    let mut bench = Bench::default();
    for path in &paths {
        let s = load_with_depth(path)?;
        let regions = if needs_regions {
            placement_regions(&s.frame, &s.depth, t, args.seed)?
        } else {
            vec![]
        };
        let ctx = QaContext::new(&s.frame, Some(&s.depth), t, args.seed)?.with_regions(regions);
        let (items, report) = generate_spatial_qa(&ctx, &cfg, args.seed)?;
        for (f, n) in report.counts {
            *counts.entry(f).or_default() += n;
        }
        for sk in report.skipped {
            reasons
                .entry(sk.family)
                .or_insert_with(|| format!("{}: {}", s.frame.frame_id, sk.reason));
        }
        if args.bench_out.is_some() {
            let masks = object_masks(&s)?;
            for qa in &items {
                add_to_bench(&mut bench, &ctx, qa, &masks)?;
            }
        }
        pairs.extend(items);
    }

    let empty: Vec<String> = counts
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(f, _)| format!("{f} ({})", reasons.get(f).map_or("no items", String::as_str)))
        .collect();
    if !empty.is_empty() {
        return Err(Unsatisfiable(format!("no items for requested family: {}", empty.join("; "))).into());
    }

    write_atomic(&args.out, jsonl(&pairs)?.as_bytes())?;
    if let Some(dir) = &args.bench_out {
        write_bench(dir, &bench)?;
    }
    let summary: Vec<String> = counts.iter().map(|(f, n)| format!("{f}={n}")).collect();
    println!("{} scenes, {} items: {}", paths.len(), pairs.len(), summary.join(" "));
    if args.bench_out.is_some() {
        println!(
            "benchmark: {} samples, {} point items without a mask",
            bench.samples.len(),
            bench.dropped
        );
    }
    Ok(())
}

pub fn score(responses: &Path, gt: &Path, out: &Path, group_size: Option<usize>, t: &Thresholds) -> anyhow::Result<()> {
    let responses: Vec<ResponseRecord> = read_rows(responses)?;
    let truths: Vec<GroundTruthRecord> = read_rows(gt)?;
    let grouping = match group_size {
        Some(n) => Grouping::Contiguous(n),
        None if responses.iter().any(|r| r.group_id.is_some()) => Grouping::ByGroupId,
        None => Grouping::None,
    };
    let rows = score_batch(&responses, &truths, t.alpha, grouping, t)?;
    write_atomic(out, jsonl(&rows)?.as_bytes())?;
    let mean = rows.iter().map(|r| r.total).sum::<f64>() / rows.len().max(1) as f64;
    println!("{} responses scored, mean total {mean:.4}", rows.len());
    Ok(())
}

pub fn evaluate(benchmark: &Path, predictions: &Path, out: &Path) -> anyhow::Result<()> {
    let samples: Vec<BenchmarkSample> = read_rows(benchmark)?;
    let preds: Vec<Prediction> = read_rows(predictions)?;
    if preds.is_empty() {
        return Err(Error::Usage(format!("{} has no predictions", predictions.display())).into());
    }
    if samples.is_empty() {
        return Err(Error::Usage(format!("{} has no samples", benchmark.display())).into());
    }
    let masks = load_masks(&samples, benchmark)?;
    let report = benchmark_success_rate(&preds, &samples, &masks)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    print!("{}", report.table());
    Ok(())
}

pub fn synth_scene(seed: u64, count: usize, out: &Path, min_objects: usize, max_objects: usize) -> anyhow::Result<()> {
    if min_objects == 0 || min_objects > max_objects {
        return Err(Error::Usage(format!(
            "need 1 <= --min-objects <= --max-objects, got {min_objects}..{max_objects}"
        ))
        .into());
    }
    let cfg = SynthConfig {
        min_objects,
        max_objects,
        ..SynthConfig::default()
    };
    ensure_dir(out)?;
    for i in 0..count {
        let scene = generate_scene(seed, i, &cfg)?;
        // stage in a private directory, then move each file into place
        let stage = tempfile::tempdir_in(out).map_err(|e| io_err(out, e))?;
        scene.write(stage.path())?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(stage.path())
            .map_err(|e| io_err(stage.path(), e))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(|e| io_err(stage.path(), e))?;
        // scene JSON last so readers never see it before its depth and masks
        files.sort_by_key(|p| p.extension().is_some_and(|e| e == "json"));
        for f in files {
            let dest = out.join(f.file_name().expect("staged file name"));
            std::fs::rename(&f, &dest).map_err(|e| io_err(&dest, e))?;
        }
        println!("{}", out.join(format!("{}.json", scene.frame.frame_id)).display());
    }
    Ok(())
}
