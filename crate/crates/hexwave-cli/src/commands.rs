//! Subcommand drivers. Each one validates its settings in full, then
//! computes and writes artifacts into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hexwave::config::{Config, PerturbationSpec};
use hexwave::dirac::{gap_sweep, linear_fit, low_contrast_validate, DiracOptions, DiracPointData, LowContrastReport};
use hexwave::envelope::{curved_edge_initial, evolve, linear_line_mode, EvolveOptions, MassProfile};
use hexwave::io::{self, FieldDump};
use hexwave::maxwell_te::{refinement_shift, run_desk_comparison, DeskRun};
use hexwave::modes::{continuation_sweep, line_mass, solve_line_mode, solve_lump, ModeKind};
use hexwave::{bloch, render, HexLattice, Result, Vec2, C64};

use crate::settings::{
    BandSweep, BandsSettings, Common, CompareSettings, DiracSettings, EvolveSettings, GapSettings, Initial,
    LowContrastSettings, ModeSettings,
};

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn bands(cfg: &Config) -> Result<Vec<PathBuf>> {
    let common = Common::from_config(cfg)?;
    let s = BandsSettings::from_config(cfg)?;
    let weight = common.weight.build()?;
    let lat = HexLattice::standard();
    let reduced: Vec<[f64; 2]> = match s.sweep {
        BandSweep::Surface { n } => (0..n)
            .flat_map(|i| (0..n).map(move |j| [i as f64 / n as f64, j as f64 / n as f64]))
            .collect(),
        BandSweep::Path { points } => {
            let corners = [[0.0, 0.0], [1.0 / 3.0, -1.0 / 3.0], [0.5, 0.0], [0.0, 0.0]];
            let mut out = Vec::new();
            for leg in corners.windows(2) {
                for p in 0..points {
                    let t = p as f64 / points as f64;
                    out.push([leg[0][0] + t * (leg[1][0] - leg[0][0]), leg[0][1] + t * (leg[1][1] - leg[0][1])]);
                }
            }
            out.push(corners[3]);
            out
        }
    };
    let kpoints: Vec<Vec2> = reduced.iter().map(|&t| lat.dual_point(t)).collect();
    prepare_output(&common.output)?;
    let table = bloch::band_surface_sweep(&weight, &kpoints, s.bands, common.truncation)?;
    let rows: Vec<(Vec2, usize, f64)> = table
        .kpoints
        .iter()
        .zip(&table.omegas)
        .flat_map(|(k, om)| om.iter().enumerate().map(move |(b, &w)| (*k, b + 1, w)))
        .collect();
    let path = common.output.join("bands.csv");
    io::save_csv(&path, &io::BANDS_HEADER, &io::band_rows(&rows))?;
    Ok(vec![path])
}

fn dirac_data(common: &Common, fit: bool, radii: Vec<f64>) -> Result<DiracPointData> {
    let weight = common.weight.build()?;
    let v = common.perturbation.build();
    let opts = DiracOptions { truncation: common.truncation, radii, fit, ..Default::default() };
    DiracPointData::compute(&weight, &v, &opts)
}

pub fn dirac_report(d: &DiracPointData) -> String {
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"omegaD\": {},", d.omega_d);
    let _ = writeln!(s, "  \"band\": {},", d.band);
    let _ = writeln!(s, "  \"k\": [{}, {}],", d.k.k.x, d.k.k.y);
    let _ = writeln!(s, "  \"CD\": {},", d.cd);
    let _ = writeln!(s, "  \"thetaSharp\": {},", d.theta_sharp);
    let _ = writeln!(s, "  \"beta1\": {},", d.nonlinear.beta1);
    let _ = writeln!(s, "  \"beta2\": {},", d.nonlinear.beta2);
    let _ = writeln!(s, "  \"degeneracySplit\": {:e},", d.degeneracy_split);
    let _ = writeln!(s, "  \"nextGap\": {},", d.next_gap);
    let _ = writeln!(s, "  \"massOffDiagonal\": {:e},", d.mass.off_diagonal());
    let _ = writeln!(s, "  \"massTraceResidual\": {:e},", d.mass.trace_residual());
    let _ = writeln!(s, "  \"truncation\": {},", d.truncation);
    match &d.fit {
        Some(f) => {
            let _ = writeln!(
                s,
                "  \"fit\": {{\"cone\": {}, \"spread\": {:e}, \"residualBound\": {:e}, \"relativeToCD\": {:e}}}",
                f.cone,
                f.spread,
                f.residual_bound,
                (f.cone - d.cd) / d.cd
            );
        }
        None => s.push_str("  \"fit\": null\n"),
    }
    s.push_str("}\n");
    s
}

pub fn dirac(cfg: &Config) -> Result<Vec<PathBuf>> {
    let common = Common::from_config(cfg)?;
    let s = DiracSettings::from_config(cfg)?;
    prepare_output(&common.output)?;
    let d = dirac_data(&common, s.fit, s.radii)?;
    let report = dirac_report(&d);
    print!("{report}");
    let path = common.output.join("dirac.txt");
    write_text(&path, &report)?;
    Ok(vec![path])
}

pub fn gap(cfg: &Config) -> Result<Vec<PathBuf>> {
    let common = Common::from_config(cfg)?;
    let s = GapSettings::from_config(cfg)?;
    prepare_output(&common.output)?;
    let d = dirac_data(&common, false, Vec::new())?;
    let weight = common.weight.build()?;
    let v = common.perturbation.build();
    let sweep = gap_sweep(&weight, &v, &s.deltas, common.truncation, d.band)?;
    let path = common.output.join("gap.csv");
    io::save_csv(&path, &io::GAP_HEADER, &io::gap_rows(&sweep))?;
    let (x, y): (Vec<f64>, Vec<f64>) = sweep.iter().copied().unzip();
    let (slope, _, r2) = linear_fit(&x, &y);
    println!("thetaSharp = {}", d.theta_sharp);
    for (delta, g) in &sweep {
        println!("delta = {delta}  gap = {g}  ratio = {}", g / (2.0 * d.theta_sharp.abs() * delta));
    }
    println!("slope = {slope}  r2 = {r2}");
    Ok(vec![path])
}

pub fn low_contrast_text(r: &LowContrastReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "omega0 = {}", r.omega0);
    let _ = writeln!(s, "first_order_pair = {}", r.h_pair);
    let _ = writeln!(s, "first_order_one = {}", r.h_one);
    let _ = writeln!(s, "epsilon,omega_d,omega_one,cd,stated_pair_err,stated_one_err,corrected_pair_err,corrected_one_err");
    let (sp, so, cp, co) =
        (r.stated_pair_errors(), r.stated_one_errors(), r.corrected_pair_errors(), r.corrected_one_errors());
    for (i, x) in r.samples.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{:e},{:e},{:e},{:e}",
            x.epsilon, x.omega_d, x.omega_one, x.cd, sp[i], so[i], cp[i], co[i]
        );
    }
    for (name, e) in [("stated_pair", &sp), ("stated_one", &so), ("corrected_pair", &cp), ("corrected_one", &co)] {
        let ratios: Vec<String> = LowContrastReport::richardson(e).iter().map(|v| format!("{v:.3}")).collect();
        let _ = writeln!(s, "{name}: richardson = [{}] log_slope = {:.3}", ratios.join(", "), r.log_slope(e));
    }
    let cd: Vec<String> = r.cd_deviations().iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(s, "cd_minus_half = [{}]", cd.join(", "));
    s
}

pub fn low_contrast(cfg: &Config) -> Result<Vec<PathBuf>> {
    let common = Common::from_config(cfg)?;
    let s = LowContrastSettings::from_config(cfg)?;
    prepare_output(&common.output)?;
    let w1 = PerturbationSpec::H.build();
    let r = low_contrast_validate(&w1, &s.epsilons, common.truncation)?;
    let text = low_contrast_text(&r);
    print!("{text}");
    let path = common.output.join("low_contrast.txt");
    write_text(&path, &text)?;
    Ok(vec![path])
}

pub fn evolve_cmd(cfg: &Config) -> Result<Vec<PathBuf>> {
    let common = Common::from_config(cfg)?;
    let s = EvolveSettings::from_config(cfg)?;
    let mass = MassProfile::build(s.mass.clone(), &s.grid)?;
    let mut field = match s.initial {
        Initial::Line { xi, gaussian } => {
            linear_line_mode(s.grid.clone(), xi, |x1| C64::new((-gaussian * x1 * x1).exp(), 0.0))
        }
        Initial::Packet { center } => curved_edge_initial(s.grid.clone(), &mass, center, s.theta, s.speed)?,
    };
    if let Some((p1, p2)) = s.nonlinear {
        field = field.with_nonlinearity(p1, p2);
    }
    let opts = EvolveOptions {
        dt: s.dt,
        steps: s.steps,
        linear_only: s.nonlinear.is_none(),
        speed: s.speed,
        theta: s.theta,
        sample_every: s.sample_every,
        snapshot_every: s.snapshot_every,
        tube_half_width: s.tube,
    };
    prepare_output(&common.output)?;
    let traj = evolve(&mut field, &mass, &opts)?;
    let mut out = Vec::new();
    let path = common.output.join("observables.csv");
    io::save_csv(&path, &io::OBSERVABLES_HEADER, &io::observable_rows(&traj.observables))?;
    out.push(path);
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let p = common.output.join(format!("envelope_{i:04}.hny"));
        FieldDump::from_envelope(snap).save(&p)?;
        out.push(p);
    }
    let p = common.output.join("envelope_final.hny");
    FieldDump::from_envelope(&field).save(&p)?;
    out.push(p);
    Ok(out)
}

pub fn solve_mode(cfg: &Config) -> Result<Vec<PathBuf>> {
    let common = Common::from_config(cfg)?;
    let s = ModeSettings::from_config(cfg)?;
    let mass = line_mass(&s.grid)?;
    prepare_output(&common.output)?;
    let mut out = Vec::new();
    if !s.mus.is_empty() {
        let c = continuation_sweep(&s.mus, s.p1, s.p2, s.kind, &mass, s.grid.clone(), &s.newton)?;
        let p = common.output.join("power.csv");
        io::save_csv(&p, &io::POWER_HEADER, &io::power_rows(&c))?;
        out.push(p);
        if let Some(loss) = &c.lost {
            log::warn!("branch lost at mu = {}: {}", loss.mu, loss.reason);
        }
    }
    let mode = match s.kind {
        ModeKind::Line => solve_line_mode(s.mu, s.p1, s.p2, &mass, s.grid.clone(), None, &s.newton)?,
        ModeKind::Lump => solve_lump(s.mu, s.p1, s.p2, &mass, s.grid.clone(), None, &s.newton)?,
    };
    let stem = match s.kind {
        ModeKind::Line => "line",
        ModeKind::Lump => "lump",
    };
    let p = common.output.join(format!("{stem}.hny"));
    FieldDump::from_mode(&mode).save(&p)?;
    out.push(p);
    let p = common.output.join(format!("{stem}.txt"));
    let text = io::mode_sidecar(&mode);
    print!("{text}");
    write_text(&p, &text)?;
    out.push(p);
    Ok(out)
}

pub fn compare_text(run: &DeskRun, refined: Option<(&DeskRun, f64)>) -> String {
    let r = &run.report;
    let mut s = String::new();
    let _ = writeln!(s, "dt = {}", run.maxwell.dt);
    let _ = writeln!(s, "wall_seconds = {:.1}", run.maxwell.wall_seconds);
    let _ = writeln!(s, "theta = {}", run.theta);
    let _ = writeln!(s, "speed = {}", run.speed);
    let _ = writeln!(s, "energy_quadrature_ratio = {}", run.energy_quadrature_ratio);
    let _ = writeln!(s, "energy_drift = {:e}", run.maxwell.energy_drift());
    let _ = writeln!(s, "distance = {}", r.distance);
    let _ = writeln!(s, "max_relative_discrepancy = {}", r.max_relative_discrepancy);
    let _ = writeln!(s, "maxwell_min_edge_fraction = {}", r.maxwell_min_edge_fraction);
    let _ = writeln!(s, "envelope_min_edge_fraction = {}", r.envelope_min_edge_fraction);
    let _ = writeln!(s, "profile_correlation = {}", r.profile_correlation);
    if let Some((f, shift)) = refined {
        let _ = writeln!(s, "refined_energy_drift = {:e}", f.maxwell.energy_drift());
        let _ = writeln!(s, "refined_max_relative_discrepancy = {}", f.report.max_relative_discrepancy);
        let _ = writeln!(s, "refinement_shift = {shift}");
    }
    s
}

pub fn compare(cfg: &Config) -> Result<Vec<PathBuf>> {
    let common = Common::from_config(cfg)?;
    let s = CompareSettings::from_config(cfg)?;
    prepare_output(&common.output)?;
    let weight = common.weight.build()?;
    let v = common.perturbation.build();
    let d = dirac_data(&common, false, Vec::new())?;
    let run = run_desk_comparison(&s.desk, &d, &weight, &v)?;
    let refined = if s.refine {
        let f = run_desk_comparison(&s.desk.refined(), &d, &weight, &v)?;
        let shift = refinement_shift(&run.maxwell, &f.maxwell)?;
        Some((f, shift))
    } else {
        None
    };
    let mut out = Vec::new();
    let p = common.output.join("centroids.csv");
    io::save_csv(&p, &io::CENTROID_HEADER, &io::centroid_rows(&run.maxwell))?;
    out.push(p);
    let r = &run.report;
    let rows: Vec<Vec<f64>> = (0..r.times.len())
        .map(|i| {
            let (m, e) = (r.maxwell_centroids[i], r.envelope_centroids[i]);
            vec![r.times[i], m.x, m.y, e.x, e.y, r.discrepancy[i]]
        })
        .collect();
    let p = common.output.join("comparison.csv");
    io::save_csv(&p, &["t", "maxwell_cx", "maxwell_cy", "envelope_cx", "envelope_cy", "discrepancy"], &rows)?;
    out.push(p);
    let cells = &run.config;
    let (n1, n2) = (cells.cells[0] * cells.per_cell[0], cells.cells[1] * cells.per_cell[1]);
    for (i, (_, e)) in run.maxwell.snapshots.iter().enumerate() {
        let p = common.output.join(format!("energy_{i:04}.hny"));
        FieldDump::scalar(n1, n2, e)?.save(&p)?;
        out.push(p);
    }
    let text = compare_text(&run, refined.as_ref().map(|(f, sh)| (f, *sh)));
    print!("{text}");
    let p = common.output.join("compare.txt");
    write_text(&p, &text)?;
    out.push(p);
    Ok(out)
}

pub fn render_cmd(input: &Path, channel: usize, output: &Path) -> Result<Vec<PathBuf>> {
    let dump = FieldDump::load(input)?;
    render::render_to_file(&dump, channel, output)?;
    Ok(vec![output.to_path_buf()])
}
