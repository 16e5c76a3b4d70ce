use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symclt::bounds::PairMoments;
use symclt::frames::{check_tight, simplex_geometry, standard_frame, TightFrame};
use symclt::moments::{summarize_with, MomentSummary, PairCoverage, SquareCovariance};
use symclt::report::{
    any_failure, certify, write_reports_csv, BoundReport, CertifyRequest, Verdict,
    FULL_PAIR_SCAN_MAX_DIM,
};
use symclt::rng::{derive_seed, substream_seed};
use symclt::samplers::{sample, DistributionKind, DistributionSpec};
use symclt::stats::RunningStats;
use symclt::subspaces::{
    estimate_ank, haar_orthogonal, reflection_pair_diagnostics_stream,
    rotation_pair_diagnostics_stream, stein_rr_assemble, write_ank_csv, AnkParams,
};

use crate::config::{DiagnoseConfig, ExperimentConfig, FrameChoice};
use crate::{Failure, VERSION};

/// Everything needed to reproduce a run.
#[derive(Serialize, Deserialize)]
pub struct Manifest<T> {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub results: T,
}

#[derive(Serialize)]
struct MomentReport {
    spec: DistributionSpec,
    samples: u64,
    seed: u64,
    mean_second: f64,
    max_third_abs: f64,
    max_fourth: f64,
    norm2_mean: f64,
    norm2_var: f64,
    norm2_absdev: f64,
    max_square_cov: Option<SquareCovariance>,
    pair_coverage: PairCoverage,
    seconds: Vec<f64>,
}

impl MomentReport {
    fn new(s: &MomentSummary, spec: DistributionSpec, seed: u64, coverage: PairCoverage) -> Self {
        MomentReport {
            spec,
            samples: s.count(),
            seed,
            mean_second: s.mean_second(),
            max_third_abs: s.max_third_abs(),
            max_fourth: s.max_fourth(),
            norm2_mean: s.norm2_mean(),
            norm2_var: s.norm2_var(),
            norm2_absdev: s.norm2_absdev(),
            max_square_cov: s.max_square_cov(),
            pair_coverage: coverage,
            seconds: s.seconds(),
        }
    }
}

/// File-name-safe label: `lp_ball(p=1)` becomes `lp_ball_p_1`.
pub fn slug(kind: &DistributionKind) -> String {
    let mut out = String::new();
    for c in kind.to_string().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

fn cell_seed(seed: u64, kind: &DistributionKind, n: usize) -> u64 {
    derive_seed(seed, &format!("{kind}/n={n}"))
}

fn cells(cfg: &ExperimentConfig) -> Vec<(DistributionKind, usize)> {
    let dims = cfg.dims.values();
    let mut out = Vec::new();
    for kind in &cfg.distributions {
        for &n in &dims {
            out.push((*kind, n));
        }
    }
    out
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn prepare(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .map_err(|e| Failure::config(format!("cannot create {}: {e}", out.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::config(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn manifest<T>(cfg: &ExperimentConfig, command: &str, results: T) -> Manifest<T> {
    Manifest {
        version: VERSION.to_string(),
        command: command.to_string(),
        config: cfg.clone(),
        results,
    }
}

/// The written file names, relative to the output directory.
pub fn cmd_sample(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, Failure> {
    prepare(out)?;
    let mut written = Vec::new();
    for (kind, n) in cells(cfg) {
        let seed = cell_seed(cfg.seed, &kind, n);
        let spec = DistributionSpec::isotropic(kind, n, seed)?;
        let batch = sample(&spec, cfg.samples, seed)?;
        let coverage = if n <= FULL_PAIR_SCAN_MAX_DIM {
            PairCoverage::All
        } else {
            PairCoverage::Subset {
                coords: FULL_PAIR_SCAN_MAX_DIM,
                seed: derive_seed(seed, "pair-subset"),
            }
        };
        let summary = summarize_with(&batch, coverage)?;
        let stem = format!("{}_n{n}", slug(&kind));
        let bin = format!("sample_{stem}.bin");
        let mut w = create(&out.join(&bin))?;
        batch.write_binary(&mut w)?;
        w.flush()?;
        let json = format!("moments_{stem}.json");
        write_json(&out.join(&json), &MomentReport::new(&summary, spec, seed, coverage))?;
        println!(
            "{spec}: N={} mean E X_i^2={:.6} Var|X|^2={:.6}",
            batch.len(),
            summary.mean_second(),
            summary.norm2_var()
        );
        written.push(bin);
        written.push(json);
    }
    write_json(&out.join("run.json"), &manifest(cfg, "sample", &written))?;
    Ok(written)
}

pub fn cmd_certify(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<BoundReport>, Failure> {
    prepare(out)?;
    let mut reports = Vec::new();
    for (kind, n) in cells(cfg) {
        let seed = cell_seed(cfg.seed, &kind, n);
        let spec = DistributionSpec::isotropic(kind, n, seed)?;
        let req = CertifyRequest {
            spec,
            thetas: cfg.thetas.clone(),
            samples: cfg.samples,
            seed,
            delta: cfg.delta,
            constants: cfg.constants.clone(),
            bins: cfg.bins,
        };
        reports.extend(certify(&req)?);
    }
    print_reports(&reports);
    write_json(&out.join("reports.json"), &manifest(cfg, "certify", &reports))?;
    let mut w = create(&out.join("reports.csv"))?;
    write_reports_csv(&reports, &mut w)?;
    w.flush()?;
    Ok(reports)
}

pub fn print_reports(reports: &[BoundReport]) {
    for r in reports {
        let bound = r
            .bound
            .as_ref()
            .map(|b| format!("{} {:.4}", b.bound, b.value))
            .unwrap_or_else(|| "no explicit bound".into());
        let slack = r
            .empirical
            .dkw_slack
            .map(|s| format!(" (DKW {s:.4})"))
            .unwrap_or_default();
        println!(
            "{} n={} θ={} {}: empirical {:.4}{slack}, {bound} -> {}",
            r.spec.kind, r.spec.n, r.theta, r.kind, r.empirical.point_estimate, r.verdict
        );
    }
    let fails = reports.iter().filter(|r| r.verdict == Verdict::Fail).count();
    println!("{} reports, {fails} failing", reports.len());
}

pub fn cmd_report(path: &Path) -> Result<bool, Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let m: Manifest<Vec<BoundReport>> = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    println!("written by symclt {}", m.version);
    print_reports(&m.results);
    Ok(!any_failure(&m.results))
}

pub fn cmd_scan_ank(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, Failure> {
    let ank = cfg
        .ank
        .as_ref()
        .ok_or_else(|| Failure::config("scan-ank needs an `ank` section"))?;
    if ank.eps.is_empty() {
        return Err(Failure::config("`ank.eps` is empty"));
    }
    prepare(out)?;
    let mut estimates = Vec::new();
    for (kind, n) in cells(cfg) {
        let seed = cell_seed(cfg.seed, &kind, n);
        let spec = DistributionSpec::isotropic(kind, n, seed)?;
        let est = estimate_ank(
            &spec,
            AnkParams {
                k: ank.k,
                n_subspaces: ank.n_subspaces,
                n_dirs: ank.n_dirs,
                samples: cfg.samples,
                seed,
            },
        )?;
        let fractions: Vec<String> = ank
            .eps
            .iter()
            .map(|&e| format!("eps={e}: {:.3}", est.fraction(e)))
            .collect();
        println!("{kind} n={n} k={}: {}", ank.k, fractions.join(", "));
        estimates.push(est);
    }
    let path = out.join("ank.csv");
    let mut w = create(&path)?;
    write_ank_csv(&estimates, &ank.eps, &mut w)?;
    w.flush()?;
    write_json(&out.join("run.json"), &manifest(cfg, "scan-ank", "ank.csv"))?;
    Ok(path)
}

pub fn cmd_diagnose(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, Failure> {
    let which = cfg
        .diagnose
        .as_ref()
        .ok_or_else(|| Failure::config("diagnose needs a `diagnose` section"))?;
    prepare(out)?;
    let (name, table) = match which {
        DiagnoseConfig::Reflection { frame } => ("reflection", reflection_table(cfg, *frame)?),
        DiagnoseConfig::Rotation { eps } => ("rotation", rotation_table(cfg, eps)?),
        DiagnoseConfig::Haar => ("haar", haar_table(cfg)?),
        DiagnoseConfig::Frames => ("frames", frames_table(cfg)?),
    };
    let file = format!("diagnose_{name}.csv");
    let path = out.join(&file);
    let mut w = create(&path)?;
    w.write_all(table.as_bytes())?;
    w.flush()?;
    write_json(&out.join("run.json"), &manifest(cfg, "diagnose", &file))?;
    Ok(path)
}

fn reflection_table(cfg: &ExperimentConfig, frame: FrameChoice) -> Result<String, Failure> {
    let mut t = String::from(
        "distribution,n,theta,frame,lambda,two_over_n,slope,slope_se,slope_over_lambda,intercept,cond_var,cond_var_upper,third_abs,stein_rr_bound\n",
    );
    for (kind, n) in cells(cfg) {
        let seed = cell_seed(cfg.seed, &kind, n);
        let spec = DistributionSpec::isotropic(kind, n, seed)?;
        let geometry;
        let standard;
        let (f, exact): (&TightFrame, Option<PairMoments>) = match frame {
            FrameChoice::Standard => {
                standard = standard_frame(n)?;
                (&standard, None)
            }
            FrameChoice::SimplexEdges => {
                geometry = simplex_geometry(n)?;
                let exact = (kind == DistributionKind::SimplexUniform).then_some(PairMoments::SimplexExact);
                (geometry.edge_frame(), exact)
            }
        };
        for (i, theta_spec) in cfg.thetas.iter().enumerate() {
            let theta = theta_spec.resolve(n)?;
            let d = reflection_pair_diagnostics_stream(
                &spec,
                f,
                &theta,
                cfg.samples,
                substream_seed(seed, i as u64),
                exact.as_ref(),
            )?;
            let bound = stein_rr_assemble(&d)?.value;
            println!(
                "{kind} n={n} θ={theta_spec}: slope/λ = {:.4} ± {:.4}",
                d.slope / d.lambda,
                d.slope_se / d.lambda
            );
            t.push_str(&format!(
                "{kind},{n},{theta_spec},{},{},{},{},{},{},{},{},{},{},{}\n",
                frame_name(frame),
                d.lambda,
                2.0 / n as f64,
                d.slope,
                d.slope_se,
                d.slope / d.lambda,
                d.intercept,
                d.cond_var,
                d.cond_var_upper.map(|v| v.to_string()).unwrap_or_default(),
                d.third_abs,
                bound
            ));
        }
    }
    Ok(t)
}

fn frame_name(f: FrameChoice) -> &'static str {
    match f {
        FrameChoice::Standard => "standard",
        FrameChoice::SimplexEdges => "simplex_edges",
    }
}

fn rotation_table(cfg: &ExperimentConfig, eps: &[f64]) -> Result<String, Failure> {
    let mut t = String::from("distribution,n,eps,r1,r1_se,r1_limit,r2,r2_se,r3,r3_se\n");
    for (kind, n) in cells(cfg) {
        let seed = cell_seed(cfg.seed, &kind, n);
        let spec = DistributionSpec::isotropic(kind, n, seed)?;
        for r in rotation_pair_diagnostics_stream(&spec, cfg.samples, eps, seed)? {
            println!(
                "{kind} n={n} ε={}: r1={:.4} r2={:.4} r3={:.4}",
                r.eps, r.r1, r.r2, r.r3
            );
            t.push_str(&format!(
                "{kind},{n},{},{},{},{},{},{},{},{}\n",
                r.eps, r.r1, r.r1_se, r.r1_limit, r.r2, r.r2_se, r.r3, r.r3_se
            ));
        }
    }
    Ok(t)
}

fn haar_table(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let mut t = String::from(
        "n,draws,u11_sq_mean,u11_sq_se,u11_sq_exact,u11_fourth_mean,u11_fourth_se,u11_fourth_exact,max_orthogonality_error\n",
    );
    for n in cfg.dims.values() {
        let seed = derive_seed(cfg.seed, &format!("haar/n={n}"));
        let mut sq = RunningStats::new();
        let mut fourth = RunningStats::new();
        let mut worst = 0.0f64;
        for d in 0..cfg.samples as u64 {
            let q = haar_orthogonal(n, substream_seed(seed, d))?;
            let u = q.entry(0, 0);
            sq.push(u * u);
            fourth.push(u.powi(4));
            if d < 100 {
                worst = worst.max(q.orthogonality_error());
            }
        }
        let nf = n as f64;
        let exact4 = 3.0 / (nf * (nf + 2.0));
        println!(
            "n={n}: E u11^2 = {:.5} (1/n = {:.5}), E u11^4 = {:.5} (3/(n(n+2)) = {exact4:.5})",
            sq.mean(),
            1.0 / nf,
            fourth.mean()
        );
        t.push_str(&format!(
            "{n},{},{},{},{},{},{},{exact4},{worst}\n",
            cfg.samples,
            sq.mean(),
            sq.std_error(),
            1.0 / nf,
            fourth.mean(),
            fourth.std_error()
        ));
    }
    Ok(t)
}

fn frames_table(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let mut t = String::from("n,standard_residual,simplex_edge_residual,max_vertex_error\n");
    let mut worst = (0.0f64, 0.0f64);
    for n in cfg.dims.values() {
        let standard = check_tight(&standard_frame(n)?);
        let geometry = simplex_geometry(n)?;
        let edges = check_tight(geometry.edge_frame());
        let target = -1.0 / n as f64;
        let mut vertex = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let g: f64 = geometry.vertex(i).iter().zip(geometry.vertex(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { target };
                vertex = vertex.max((g - want).abs());
            }
        }
        worst = (worst.0.max(standard.max(edges)), worst.1.max(vertex));
        t.push_str(&format!("{n},{standard},{edges},{vertex}\n"));
    }
    println!("max frame residual {:.3e}, max vertex error {:.3e}", worst.0, worst.1);
    Ok(t)
}
