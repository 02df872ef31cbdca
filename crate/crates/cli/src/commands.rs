use std::fs;
use std::path::Path;

use anyhow::Context;
use log::{info, warn};
use mtica::sim::campaign::{run_experiment, Algorithm, CampaignConfig};
use mtica::sim::report::{summary_json, write_trials_csv};
use mtica::sim::{gen_mixing, mix, sample_sources};
use mtica::{amari_error, DataMatrix, SeedStream, SourceFamily, SourceSpec};
use serde_json::json;

use crate::args::{DemoArgs, ExperimentArgs, SeparateArgs};
use crate::config::{campaign_config, env_seed, load_optional, resolve_seed};
use crate::data_io::{read_matrix, write_matrix, write_text};
use crate::Failure;

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::Operational)
}

pub fn separate(args: &SeparateArgs) -> Result<(), Failure> {
    let file = load_optional(args.config.as_deref())?;
    let mut cfg = file.config.clone();
    cfg.seed = resolve_seed(args.seed, &file)?;
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(tau) = args.tau {
        cfg.tau = tau;
    }
    let algorithm = match (args.algo, file.sets_algorithms, cfg.algorithms.as_slice()) {
        (Some(a), _, _) => a,
        (None, true, [a]) => *a,
        (None, true, _) => {
            return Err(Failure::Usage(
                "config file lists several algorithms; pick one with --algo".into(),
            ))
        }
        (None, false, _) => Algorithm::Gmtica,
    };
    cfg.algorithms = vec![algorithm];
    if cfg.m == 0 || (algorithm == Algorithm::Emtica && cfg.m < 2) {
        return Err(Failure::Usage(format!(
            "--m must be at least {} for {algorithm}",
            if algorithm == Algorithm::Emtica { 2 } else { 1 }
        )));
    }
    if !(cfg.tau.is_finite() && cfg.tau > 0.0) {
        return Err(Failure::Usage(format!("--tau must be positive, got {}", cfg.tau)));
    }

    let data = read_matrix(&args.input, args.header)?;
    let (n, p) = (data.n_samples(), data.n_channels());
    if n <= p {
        return Err(Failure::Operational(anyhow::anyhow!(
            "{}: need more samples than channels, got {n} rows and {p} columns",
            args.input.display()
        )));
    }
    info!(
        "separating {n} x {p} samples with {algorithm} (m = {}, seed = {})",
        cfg.m, cfg.seed
    );

    let est = algorithm
        .separate(&data, cfg.m, cfg.tau, &SeedStream::new(cfg.seed), &cfg.jd_options())
        .map_err(|e| Failure::Operational(e.into()))?;
    if !est.jd.converged {
        warn!(
            "joint diagonalization stopped after {} sweeps without converging",
            est.jd.iterations
        );
    }
    if est.degenerate {
        warn!(
            "test-point spectra are nearly indistinguishable (separability {:e}); the estimate is unreliable",
            est.separability
        );
    }
    let sources = est.sources(&data).map_err(|e| Failure::Operational(e.into()))?;

    create_dir(&args.outdir)?;
    let diagnostics = json!({
        "algorithm": algorithm.name(),
        "seed": cfg.seed,
        "input": args.input.display().to_string(),
        "n": n,
        "p": p,
        "m": cfg.m,
        "tau": cfg.tau,
        "jd_max_iter": cfg.jd_max_iter,
        "jd_tol": cfg.jd_tol,
        "jd_residual": est.jd.residual,
        "jd_iterations": est.jd.iterations,
        "jd_converged": est.jd.converged,
        "testpoints_used": est.testpoints.len() - est.dropped.len(),
        "dropped_testpoints": est.dropped,
        "separability": est.separability,
        "degenerate": est.degenerate,
    });
    let write = || -> anyhow::Result<()> {
        write_matrix(&args.outdir.join("B.csv"), &est.b)?;
        write_matrix(&args.outdir.join("sources.csv"), sources.as_matrix())?;
        write_text(
            &args.outdir.join("diagnostics.json"),
            &(serde_json::to_string_pretty(&diagnostics)? + "\n"),
        )
    };
    write().map_err(Failure::Operational)?;
    info!(
        "wrote B.csv, sources.csv and diagnostics.json to {}",
        args.outdir.display()
    );
    Ok(())
}

pub fn experiment(args: &ExperimentArgs) -> Result<(), Failure> {
    let cfg = campaign_config(args)?;
    if args.jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be positive".into()));
    }
    info!(
        "{} campaign: {} conditions x {} trials, seed {}",
        cfg.experiment,
        cfg.conditions().len(),
        cfg.trials,
        cfg.seed
    );
    let result = run_experiment(&cfg, args.jobs).map_err(|e| Failure::Usage(e.to_string()))?;

    create_dir(&args.outdir)?;
    let write = || -> anyhow::Result<()> {
        let path = args.outdir.join("trials.csv");
        let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        write_trials_csv(std::io::BufWriter::new(file), &cfg, &result.records, args.timings)?;
        write_text(&args.outdir.join("summary.json"), &summary_json(&cfg, &result))
    };
    write().map_err(Failure::Operational)?;

    let failed = result.records.iter().filter(|r| r.amari.is_none()).count();
    if failed > 0 {
        warn!(
            "{failed} of {} runs failed; see the notes column of trials.csv",
            result.records.len()
        );
    }
    if failed == result.records.len() {
        return Err(Failure::Operational(anyhow::anyhow!(
            "every run of the campaign failed"
        )));
    }
    info!("wrote trials.csv and summary.json to {}", args.outdir.display());
    Ok(())
}

pub fn demo(args: &DemoArgs) -> Result<(), Failure> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let algorithms = if args.algo.is_empty() {
        vec![Algorithm::Emtica, Algorithm::Gmtica]
    } else {
        args.algo.clone()
    };
    let cfg = CampaignConfig {
        n: args.n,
        p: args.p,
        m: args.m,
        tau: args.tau,
        seed,
        algorithms: algorithms.clone(),
        ..CampaignConfig::default()
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let seeds = SeedStream::new(seed);
    let families: Vec<SourceFamily> = SourceFamily::ALL.iter().copied().cycle().take(args.p).collect();
    let specs: Vec<SourceSpec> = families.iter().map(|&f| SourceSpec::new(f)).collect();
    let op = |e: mtica::MticaError| Failure::Operational(e.into());
    let sources = sample_sources(&specs, args.n, &mut seeds.stream("sources", 0)).map_err(op)?;
    let a = gen_mixing(args.p, (1.0, 2.0), &mut seeds.stream("mixing", 0)).map_err(op)?;
    let x: DataMatrix = mix(&a, &sources).map_err(op)?;
    let truth = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Failure::Operational(anyhow::anyhow!("mixing matrix is singular")))?;

    println!(
        "sources: {}",
        families.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
    );
    println!("{:<8} {:>10} {:>7} {:>9}", "algo", "amari", "sweeps", "converged");
    for algorithm in algorithms {
        let est = algorithm
            .separate(&x, args.m, args.tau, &seeds, &cfg.jd_options())
            .map_err(op)?;
        let d = amari_error(&est.b, &truth).map_err(op)?;
        println!(
            "{:<8} {:>10.6} {:>7} {:>9}",
            algorithm.name(),
            d,
            est.jd.iterations,
            est.jd.converged
        );
    }

    if let Some(dir) = &args.outdir {
        create_dir(dir)?;
        write_matrix(&dir.join("mixed.csv"), x.as_matrix()).map_err(Failure::Operational)?;
        write_matrix(&dir.join("mixing.csv"), &a).map_err(Failure::Operational)?;
        info!("wrote mixed.csv and mixing.csv to {}", dir.display());
    }
    Ok(())
}
