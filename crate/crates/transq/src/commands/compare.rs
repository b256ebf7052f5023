use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use transq_core::env::game_spec;
use transq_core::eval::{median, normalize_score, sample_efficiency, smooth};

use crate::config::RunConfig;
use crate::metrics::{eval_series, read_metrics};

#[derive(Debug, Clone)]
pub struct CompareArgs {
    /// `game=metrics.csv`, or a path whose directory holds the run's `config.cfg`.
    pub ours: Vec<String>,
    pub baseline: Vec<String>,
    pub out: Option<PathBuf>,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub game: String,
    pub ours_best: Option<f64>,
    pub baseline_best: Option<f64>,
    pub ours_normalized: f64,
    pub baseline_normalized: f64,
    /// First step at which ours reaches the baseline's best smoothed score.
    pub ours_step: Option<u64>,
    pub baseline_step: Option<u64>,
}

pub const SUMMARY_HEADER: &str =
    "game,ours_best,baseline_best,ours_normalized,baseline_normalized,ours_step,baseline_step";

struct Run {
    path: PathBuf,
    frame_size: usize,
}

fn resolve(spec: &str) -> anyhow::Result<(String, Run)> {
    let (label, path) = match spec.split_once('=') {
        Some((g, p)) => (Some(g.trim().to_string()), PathBuf::from(p.trim())),
        None => (None, PathBuf::from(spec)),
    };
    let cfg_path = path.parent().unwrap_or(Path::new(".")).join("config.cfg");
    let cfg = match fs::read_to_string(&cfg_path) {
        Ok(text) => Some(RunConfig::parse(&text).with_context(|| format!("in {}", cfg_path.display()))?),
        Err(_) => None,
    };
    let game = match (&label, &cfg) {
        (Some(l), Some(c)) if *l != c.train.game => {
            bail!("mismatched env names: {} is labelled {l} but its run played {}", path.display(), c.train.game)
        }
        (Some(l), _) => l.clone(),
        (None, Some(c)) => c.train.game.clone(),
        (None, None) => bail!("{}: no game label and no config.cfg next to it", path.display()),
    };
    let frame_size = cfg.map_or(40, |c| c.train.model.frame_size);
    Ok((game, Run { path, frame_size }))
}

fn runs(specs: &[String]) -> anyhow::Result<BTreeMap<String, Run>> {
    let mut out = BTreeMap::new();
    for s in specs {
        let (game, run) = resolve(s)?;
        if out.insert(game.clone(), run).is_some() {
            bail!("game {game} listed twice");
        }
    }
    Ok(out)
}

pub fn run(args: &CompareArgs) -> anyhow::Result<Vec<CompareRow>> {
    let ours = runs(&args.ours)?;
    let base = runs(&args.baseline)?;
    if ours.keys().ne(base.keys()) {
        bail!(
            "mismatched env names: ours has {:?}, baseline has {:?}",
            ours.keys().collect::<Vec<_>>(),
            base.keys().collect::<Vec<_>>()
        );
    }
    if ours.is_empty() {
        bail!("nothing to compare");
    }
    let mut rows = Vec::new();
    for (game, o) in &ours {
        let b = &base[game];
        let load = |r: &Run| -> anyhow::Result<_> {
            let rows = read_metrics(&r.path).map_err(|e| anyhow!(e))?;
            Ok(smooth(&eval_series(&rows).map_err(|e| anyhow!(e))?, args.window))
        };
        let (so, sb) = (load(o)?, load(b)?);
        if so.is_empty() || sb.is_empty() {
            bail!("{game}: a run has no eval rows");
        }
        let spec = game_spec(game, o.frame_size.max(b.frame_size))?;
        let (ours_best, base_best) = (so.max(), sb.max());
        let norm = |v: Option<f64>| normalize_score(v.expect("non-empty"), spec.random_score, spec.human_score);
        let (ours_step, baseline_step) = sample_efficiency(&so, &sb)?;
        rows.push(CompareRow {
            game: game.clone(),
            ours_best,
            baseline_best: base_best,
            ours_normalized: norm(ours_best)?,
            baseline_normalized: norm(base_best)?,
            ours_step,
            baseline_step: Some(baseline_step),
        });
    }
    rows.push(median_row(&rows)?);
    if let Some(out) = &args.out {
        fs::write(out, summary_csv(&rows))?;
    }
    Ok(rows)
}

/// Steps that never reach the target count as infinitely late.
fn median_step(steps: impl Iterator<Item = Option<u64>>) -> Option<u64> {
    let v: Vec<f64> = steps.map(|s| s.map_or(f64::INFINITY, |x| x as f64)).collect();
    let m = median(&v).ok()?;
    m.is_finite().then(|| m.round() as u64)
}

fn median_row(rows: &[CompareRow]) -> anyhow::Result<CompareRow> {
    let on: Vec<f64> = rows.iter().map(|r| r.ours_normalized).collect();
    let bn: Vec<f64> = rows.iter().map(|r| r.baseline_normalized).collect();
    Ok(CompareRow {
        game: "Median".into(),
        ours_best: None,
        baseline_best: None,
        ours_normalized: median(&on)?,
        baseline_normalized: median(&bn)?,
        ours_step: median_step(rows.iter().map(|r| r.ours_step)),
        baseline_step: median_step(rows.iter().map(|r| r.baseline_step)),
    })
}

pub fn summary_csv(rows: &[CompareRow]) -> String {
    let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let u = |v: Option<u64>| v.map_or(String::new(), |x| x.to_string());
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.game,
            f(r.ours_best),
            f(r.baseline_best),
            r.ours_normalized,
            r.baseline_normalized,
            u(r.ours_step),
            u(r.baseline_step)
        );
    }
    s
}

pub fn table(rows: &[CompareRow]) -> String {
    let u = |v: Option<u64>| v.map_or("never".to_string(), |x| x.to_string());
    let mut s = format!(
        "{:<8} {:>12} {:>12} {:>12} {:>12}\n",
        "game", "ours %", "baseline %", "ours step", "base step"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>12.1} {:>12.1} {:>12} {:>12}",
            r.game,
            r.ours_normalized,
            r.baseline_normalized,
            u(r.ours_step),
            u(r.baseline_step)
        );
    }
    s
}
