use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::{Args, ValueEnum};
use mshap::manifold::{
    empirical_mass, fit_kde, fit_ood_classifier, threshold_for_mass, write_manifold_file, Bandwidth, ManifoldFile,
    OodParams,
};
use mshap::rng::tag;
use mshap::{load_dataset_csv, Dataset, Error, RngStream};
use rand::seq::SliceRandom;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// KDE with a fixed density threshold `--epsilon`.
    Density,
    /// KDE whose threshold holds mass `--alpha` on a calibration split.
    Mass,
    /// k-NN classifier trained against perturbed copies of the rows.
    Ood,
}

#[derive(Args, Debug)]
pub struct ManifoldArgs {
    #[arg(long)]
    data: PathBuf,
    /// The last CSV column is a target and is ignored.
    #[arg(long)]
    data_has_target: bool,
    #[arg(long, value_enum, default_value_t = Kind::Mass)]
    kind: Kind,
    #[arg(long, default_value_t = 0.99)]
    alpha: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fraction of rows held out to report the in-manifold fraction.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "manifold.txt")]
    out: PathBuf,
}

/// Shuffle the rows with `rng` and cut them at the given fractions.
pub fn split(data: &Dataset, fractions: &[f64], rng: &mut RngStream) -> Vec<Dataset> {
    let n = data.n_rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut parts = Vec::with_capacity(fractions.len() + 1);
    let mut start = 0;
    for f in fractions {
        let end = (start + (f * n as f64).round() as usize).min(n);
        parts.push(data.select(&idx[start..end]));
        start = end;
    }
    parts.push(data.select(&idx[start..]));
    parts
}

/// KDE fitted on half of `data`, thresholded to mass `alpha` on the other half.
pub fn fit_mass(data: &Dataset, alpha: f64, rng: &mut RngStream) -> Result<ManifoldFile> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("--alpha must lie in (0, 1], got {alpha}")).into());
    }
    let parts = split(data, &[0.5], rng);
    let kde = fit_kde(&parts[0], &Bandwidth::Scott)?;
    let epsilon = threshold_for_mass(&kde, &parts[1], alpha)?;
    Ok(ManifoldFile::Mass { kde, epsilon, alpha })
}

pub fn run(args: ManifoldArgs) -> Result<String> {
    if !(0.0..1.0).contains(&args.holdout) {
        return Err(Error::Config(format!("--holdout must lie in [0, 1), got {}", args.holdout)).into());
    }
    let data = load_dataset_csv(&args.data, args.data_has_target)?;
    let root = RngStream::new(args.seed);
    let parts = split(&data, &[args.holdout], &mut root.substream(tag::FIT, 0, 0));
    let (held, train) = (&parts[0], &parts[1]);
    if train.n_rows() < 4 {
        return Err(Error::Config(format!("only {} training rows after the holdout split", train.n_rows())).into());
    }
    let file = match args.kind {
        Kind::Mass => fit_mass(train, args.alpha, &mut root.substream(tag::CALIBRATION, 0, 0))?,
        Kind::Density => {
            let epsilon = args
                .epsilon
                .ok_or_else(|| Error::Config("--kind density needs --epsilon".into()))?;
            ManifoldFile::Density { kde: fit_kde(train, &Bandwidth::Scott)?, epsilon }
        }
        Kind::Ood => ManifoldFile::Ood(fit_ood_classifier(
            train,
            &OodParams::default(),
            &mut root.substream(tag::FIT, 1, 0),
        )?),
    };
    let out = args.out;
    write_manifold_file(&out, &file, data.feature_names())?;
    let epsilon = match &file {
        ManifoldFile::Density { epsilon, .. } | ManifoldFile::Mass { epsilon, .. } => Some(*epsilon),
        ManifoldFile::Ood(_) => None,
    };
    let kind = file.kind();
    let z = file.into_manifold()?;
    let held_note = if held.n_rows() > 0 {
        format!("held-out in-fraction {:.4} (n={})", empirical_mass(Arc::as_ref(&z), held), held.n_rows())
    } else {
        "no held-out rows".to_string()
    };
    let eps_note = epsilon.map(|e| format!(" epsilon={e}")).unwrap_or_default();
    Ok(format!("manifold: kind={kind}{eps_note} {held_note} -> {}", out.display()))
}
