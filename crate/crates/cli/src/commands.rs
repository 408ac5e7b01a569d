//! One function per subcommand; each writes its files through [`Outputs`].

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use dynrf::correlations::{filtered_time_trace, two_time_correlation, SpectrumResult};
use dynrf::experiments::{
    fit_phonon_coupling, run_spectrum, run_sweep, tier_comparison, RabiCurve, SweepAxis, SweepSpec,
};
use dynrf::parallel::ExecMode;
use dynrf::units::rad_ps_to_ghz;
use dynrf::{Error, Result};

use crate::config::{RunConfig, SweepSection};
use crate::manifest::RunManifest;
use crate::output::Outputs;

/// Shared inputs of every command.
pub struct Context<'a> {
    pub config: RunConfig,
    pub input: Vec<u8>,
    pub output_dir: &'a Path,
    pub exec: ExecMode,
}

impl Context<'_> {
    fn settings(&self) -> Result<dynrf::experiments::SpectrumSettings> {
        let mut s = self.config.settings()?;
        s.exec = self.exec;
        Ok(s)
    }

    fn begin(&self, command: &str) -> Result<(Outputs, RunManifest)> {
        let manifest = RunManifest::new(command, &self.config, &self.input)?;
        Ok((Outputs::create(self.output_dir)?, manifest))
    }
}

fn spectrum_rows(s: &SpectrumResult) -> impl Iterator<Item = Vec<f64>> + '_ {
    s.omega
        .iter()
        .zip(&s.intensity)
        .map(|(w, v)| vec![rad_ps_to_ghz(*w), *v])
}

pub fn spectrum(ctx: &Context, time_resolved: bool) -> Result<()> {
    let started = Instant::now();
    let cfg = ctx.config.model_config()?;
    let mut settings = ctx.settings()?;
    if time_resolved {
        settings.map_every = Some(ctx.config.grid.map_every);
    }
    let run = run_spectrum(&cfg, &settings)?;
    let (mut out, manifest) = ctx.begin("spectrum")?;
    out.csv(
        "spectrum.csv",
        &["freq_GHz", "intensity_arb"],
        spectrum_rows(&run.spectrum),
    )?;
    if let Some(map) = &run.spectrum.map {
        let omega = &run.spectrum.omega;
        let rows = map
            .times
            .iter()
            .zip(&map.values)
            .flat_map(|(t, row)| omega.iter().zip(row).map(move |(w, v)| vec![*t, rad_ps_to_ghz(*w), *v]));
        out.csv("spectrum_map.csv", &["t_ps", "freq_GHz", "intensity"], rows)?;
    }
    out.finish(manifest, started)
}

pub fn sweep(ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let Some(SweepSection { axis, values }) = ctx.config.sweep.clone() else {
        return Err(Error::config("sweep", "give --axis and --values or a [sweep] section"));
    };
    let spec = SweepSpec {
        axis,
        values: values.clone(),
        base: ctx.config.model_config()?,
    };
    let spectra = run_sweep(&spec, &ctx.settings()?)?;
    let (mut out, manifest) = ctx.begin("sweep")?;
    for (i, s) in spectra.iter().enumerate() {
        out.csv(
            &format!("sweep_{i:03}.csv"),
            &["freq_GHz", "intensity_arb"],
            spectrum_rows(s),
        )?;
    }
    let combined = values
        .iter()
        .zip(&spectra)
        .flat_map(|(v, s)| spectrum_rows(s).map(move |r| vec![*v, r[0], r[1]]));
    out.csv("sweep.csv", &["sweep_value", "freq_GHz", "intensity"], combined)?;
    out.finish(manifest, started)
}

pub fn time_trace(ctx: &Context, irf: bool) -> Result<()> {
    let started = Instant::now();
    let cfg = ctx.config.model_config()?;
    let settings = ctx.settings()?;
    let corr = two_time_correlation(&cfg, &settings.correlation_spec(&cfg))?;
    let irf = if irf { Some(ctx.config.irf()?) } else { None };
    let trace = filtered_time_trace(&corr, &ctx.config.filter()?, irf.as_ref())?;
    let (mut out, manifest) = ctx.begin("time-trace")?;
    match &trace.convolved {
        Some(conv) => {
            let rows = (0..trace.times.len()).map(|i| vec![trace.times[i], trace.intensity[i], conv[i]]);
            out.csv("trace.csv", &["t_ps", "intensity", "intensity_irf"], rows)?;
        }
        None => {
            let rows = trace.times.iter().zip(&trace.intensity).map(|(t, v)| vec![*t, *v]);
            out.csv("trace.csv", &["t_ps", "intensity"], rows)?;
        }
    }
    out.finish(manifest, started)
}

/// Reads `(amplitude, intensity)` rows; `#` lines and a header row are skipped.
pub fn read_target(path: &Path) -> Result<RabiCurve> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(display.clone(), io),
            other => Error::config("target", format!("{other:?}")),
        })?;
    let (mut areas, mut intensity) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::config("target", e.to_string()))?;
        if record.len() < 2 {
            return Err(Error::config(
                "target",
                format!("row {}: need amplitude and intensity columns", line + 1),
            ));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(a), Ok(v)) => {
                areas.push(a);
                intensity.push(v);
            }
            _ if line == 0 => continue,
            _ => {
                return Err(Error::config(
                    "target",
                    format!("row {}: cannot parse `{}`, `{}`", line + 1, &record[0], &record[1]),
                ))
            }
        }
    }
    if areas.is_empty() {
        return Err(Error::config("target", format!("{display} contains no data rows")));
    }
    RabiCurve::from_samples(areas, intensity).map_err(|e| match e {
        Error::Config { message, .. } => Error::config("target", message),
        other => other,
    })
}

pub fn fit_rabi(ctx: &Context, target: &Path) -> Result<()> {
    let started = Instant::now();
    let target = read_target(target)?;
    let base = ctx.config.model_config()?;
    let report = fit_phonon_coupling(&target, &base, &ctx.config.fit_options(), &ctx.settings()?)?;
    if report.at_bound {
        log::warn!("best alpha_p = {} ps² lies on the bracket edge", report.alpha_p);
    }
    let (mut out, manifest) = ctx.begin("fit-rabi")?;
    out.json("fit_report.json", &report)?;
    let rows = (0..target.areas.len()).map(|i| {
        vec![
            target.areas[i],
            target.intensity[i],
            report.scale * report.curve.intensity[i],
        ]
    });
    out.csv("fit_overlay.csv", &["amplitude_pi", "target", "simulated"], rows)?;
    out.finish(manifest, started)
}

#[derive(Serialize)]
struct TierSummary {
    areas: Vec<f64>,
    /// Cavity-side mirror ratio per tier and area.
    asymmetry: Vec<(String, Vec<Option<f64>>)>,
    phonon_difference: f64,
}

pub fn tiers(ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let areas = match &ctx.config.sweep {
        Some(SweepSection {
            axis: SweepAxis::Amplitude,
            values,
        }) => values.clone(),
        Some(_) => return Err(Error::config("sweep.axis", "the tier comparison sweeps the amplitude")),
        None => return Err(Error::config("sweep", "give --values or an amplitude [sweep] section")),
    };
    let mut base = ctx.config.model_config()?;
    base.phonon = Some(ctx.config.phonon_params());
    let cmp = tier_comparison(&base, &areas, &ctx.settings()?)?;
    let (mut out, manifest) = ctx.begin("tiers")?;
    let rows = cmp.runs.iter().flat_map(|run| {
        let t = run.tier.label();
        areas.iter().zip(&run.spectra).flat_map(move |(a, s)| {
            spectrum_rows(s).map(move |r| vec![t.to_string(), a.to_string(), r[0].to_string(), r[1].to_string()])
        })
    });
    out.csv("tiers.csv", &["tier", "amplitude_pi", "freq_GHz", "intensity"], rows)?;
    let summary = TierSummary {
        areas: areas.clone(),
        asymmetry: cmp
            .runs
            .iter()
            .map(|r| (r.tier.label().to_string(), r.asymmetry.clone()))
            .collect(),
        phonon_difference: cmp.phonon_difference,
    };
    out.json("tiers.json", &summary)?;
    out.finish(manifest, started)
}
