//! Single-step commands: data generation, fitting, transfer, scoring and
//! drawing.

use manifold_icp::baseline::{baseline_transfer, build_nn_map, rmse, EvalReport, EVAL_CSV_SCHEMA_VERSION};
use manifold_icp::io::{parse_nn_map, parse_transform};
use manifold_icp::kinematics::{
    arm_motion_trajectories, planar_eval_trajectories, sample_random_dataset, trajectory_dataset, DatasetFile,
    SerialManipulator, TrajectoryProtocol,
};
use manifold_icp::matching::MatchMode;
use manifold_icp::{fit as fit_clouds, FitConfig, SpdCloud};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::files::{self, load_dataset, load_model};
use crate::{BuildMapArgs, Ctx, EvalArgs, FitArgs, Format, GenDataArgs, RenderArgs, TransferArgs};

fn steps_of(spec: &str, prefix: &str) -> CliResult<usize> {
    spec[prefix.len()..]
        .parse()
        .ok()
        .filter(|&n: &usize| n >= 2)
        .ok_or_else(|| CliError::Usage(format!("{spec:?}: expected {prefix}<steps> with at least 2 steps")))
}

fn protocol_for(m: &SerialManipulator, spec: &str) -> CliResult<TrajectoryProtocol> {
    if spec.starts_with("planar_sweep:") {
        return Ok(spec.parse()?);
    }
    if spec.starts_with("planar_eval:") {
        return Ok(TrajectoryProtocol::Scripted(planar_eval_trajectories(steps_of(spec, "planar_eval:")?)));
    }
    if spec.starts_with("arm_train:") {
        return Ok(TrajectoryProtocol::Scripted(arm_motion_trajectories(m, steps_of(spec, "arm_train:")?)?.0));
    }
    if spec.starts_with("arm_eval:") {
        return Ok(TrajectoryProtocol::Scripted(arm_motion_trajectories(m, steps_of(spec, "arm_eval:")?)?.1));
    }
    Err(CliError::Usage(format!("unrecognized trajectory protocol {spec:?}")))
}

pub fn gen_data(a: &GenDataArgs, ctx: &Ctx) -> CliResult<()> {
    let m = load_model(&a.model)?;
    let (cloud, protocol) = match (&a.random, &a.trajectory) {
        (Some(n), _) => (sample_random_dataset(&m, *n, a.seed)?, format!("random:{n}")),
        (None, Some(spec)) => (trajectory_dataset(&m, &protocol_for(&m, spec)?)?, spec.clone()),
        (None, None) => unreachable!("clap requires one source"),
    };
    let mut file = DatasetFile::new(m.name.clone(), Some(a.seed), Some(protocol.clone()), &cloud);
    file.provenance = Some(ctx.provenance.to_value());
    let tag = protocol.replace([':', '/'], "_");
    let out = ctx.output(&a.out, &format!("{}_{tag}.json", m.name));
    files::write(&out, &(file.to_json() + "\n"))?;
    println!("{}", json!({ "out": out, "points": cloud.len(), "model": m.name }));
    Ok(())
}

pub fn build_map(a: &BuildMapArgs, ctx: &Ctx) -> CliResult<()> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let teacher = load_model(&a.teacher)?;
    let student = load_model(&a.student)?;
    let map = build_nn_map(&teacher, &student, a.samples, a.seed)?;
    let doc: serde_json::Value = serde_json::from_str(&map.to_json()).expect("map JSON is valid");
    let out = ctx.output(&a.out, &format!("nn_map_{}_{}.json", teacher.name, student.name));
    files::write_json(&out, &crate::provenance::attach(doc, &ctx.provenance))?;
    println!("{}", json!({ "out": out, "samples": a.samples }));
    Ok(())
}

pub fn fit(a: &FitArgs, ctx: &Ctx) -> CliResult<()> {
    let teacher = load_dataset(&a.teacher)?;
    let student = load_dataset(&a.student)?;
    let config = FitConfig {
        allow_unequal: a.allow_unequal,
        match_mode: if a.one_to_one { MatchMode::OneToOne } else { MatchMode::ManyToOne },
        ..a.flags.config()
    };
    let (transform, report) = fit_clouds(&student.value.cloud()?, &teacher.value.cloud()?, &config)?;
    let prov = ctx
        .provenance
        .clone()
        .with_input("teacher", teacher.text.as_bytes())
        .with_input("student", student.text.as_bytes());

    let out = ctx.output(&a.out, "transform.json");
    let doc: serde_json::Value = serde_json::from_str(&transform.to_json()).expect("transform JSON is valid");
    files::write_json(&out, &crate::provenance::attach(doc, &prov))?;
    let report_path = a.report.clone().unwrap_or_else(|| out.with_extension("report.json"));
    let report_doc = json!({ "config": config, "report": report });
    files::write_json(&report_path, &crate::provenance::attach(report_doc, &prov))?;
    println!(
        "{}",
        json!({
            "transform": out,
            "report": report_path,
            "iterations": report.iterations,
            "converged": report.converged,
            "final_objective": report.final_objective,
            "scale_exponent": report.scale_exponent,
        })
    );
    Ok(())
}

pub fn transfer(a: &TransferArgs, ctx: &Ctx) -> CliResult<()> {
    let transform_text = files::read(&a.transform)?;
    let transform = files::parse(&a.transform, &transform_text, parse_transform)?;
    let data = load_dataset(&a.data)?;
    let moved = transform.apply(&data.value.cloud()?)?;
    let prov = ctx
        .provenance
        .clone()
        .with_input("transform", transform_text.as_bytes())
        .with_input("data", data.text.as_bytes());
    let mut file = DatasetFile::new(data.value.model.clone(), data.value.seed, data.value.protocol.clone(), &moved);
    file.provenance = Some(prov.to_value());
    let out = ctx.output(&a.out, &format!("{}_transferred.json", files::stem(&a.data)));
    files::write(&out, &(file.to_json() + "\n"))?;
    println!("{}", json!({ "out": out, "points": moved.len() }));
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput {
    experiment: String,
    variant: String,
    samples: usize,
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<EvalReport>,
}

pub fn eval(a: &EvalArgs, ctx: &Ctx) -> CliResult<()> {
    let predicted = load_dataset(&a.predicted)?;
    let reference = load_dataset(&a.reference)?;
    let reference_cloud = reference.value.cloud()?;
    let report = rmse(&predicted.value.cloud()?, &reference_cloud)?;
    let mut prov = ctx
        .provenance
        .clone()
        .with_input("predicted", predicted.text.as_bytes())
        .with_input("reference", reference.text.as_bytes());

    let baseline = match (&a.baseline, &a.source) {
        (Some(map_path), Some(source_path)) => {
            let map_text = files::read(map_path)?;
            let map = files::parse(map_path, &map_text, parse_nn_map)?;
            let source = load_dataset(source_path)?;
            prov = prov
                .with_input("baseline", map_text.as_bytes())
                .with_input("source", source.text.as_bytes());
            let mapped = baseline_transfer(&map, &source.value.cloud()?)?;
            Some(rmse(&mapped, &reference_cloud)?)
        }
        _ => None,
    };

    let result = EvalOutput {
        experiment: a.experiment.clone(),
        variant: a.variant.clone(),
        samples: reference_cloud.len(),
        report,
        baseline,
    };
    let text = match a.format {
        Format::Json => {
            let doc = serde_json::to_value(&result).expect("report serializes");
            let mut s = serde_json::to_string_pretty(&crate::provenance::attach(doc, &prov)).expect("serializes");
            s.push('\n');
            s
        }
        Format::Csv => eval_csv(&result, &prov)?,
    };
    match &a.out {
        Some(path) => files::write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Provenance goes on a leading `#` comment line.
fn eval_csv(result: &EvalOutput, prov: &crate::provenance::Provenance) -> CliResult<String> {
    let row = result.report.csv_row(&result.experiment, &result.variant, result.samples);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Invalid(e.to_string());
    w.write_record(["experiment", "variant", "samples", "rmse", "iterations", "baseline_rmse"])
        .map_err(io)?;
    w.write_record([
        row.experiment,
        row.variant,
        row.samples.to_string(),
        row.rmse.to_string(),
        row.iterations.map(|i| i.to_string()).unwrap_or_default(),
        result.baseline.as_ref().map(|b| b.rmse.to_string()).unwrap_or_default(),
    ])
    .map_err(io)?;
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?).expect("CSV is UTF-8");
    Ok(format!("# schema {EVAL_CSV_SCHEMA_VERSION}; provenance {}\n{body}", prov.to_line()))
}

pub fn render(a: &RenderArgs, ctx: &Ctx) -> CliResult<()> {
    let mut layers: Vec<(String, SpdCloud)> = Vec::new();
    let mut prov = ctx.provenance.clone();
    for path in &a.data {
        let d = load_dataset(path)?;
        prov = prov.with_input(&path.display().to_string(), d.text.as_bytes());
        layers.push((files::stem(path), d.value.cloud()?));
    }
    let svg = crate::render::render_svg(&layers, a.view)?;
    let meta = format!("<metadata>{}</metadata>\n", xml_text(&prov.to_line()));
    let svg = svg.replacen(">\n", &format!(">\n{meta}"), 1);
    let view = match a.view {
        crate::render::View::Top => "top",
        crate::render::View::Front => "front",
    };
    let out = ctx.output(&a.out, &format!("render_{view}.svg"));
    files::write(&out, &svg)?;
    println!("{}", json!({ "out": out, "layers": layers.len() }));
    Ok(())
}

fn xml_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
