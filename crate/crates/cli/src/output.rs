//! CSV emission. Every number is written with 17 significant digits, `,`
//! separators and `\n` line ends, so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use pnpb_core::{DiagnosticsRecord, Event, FieldSet, State, System};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    let cells: Vec<String> = values.into_iter().map(num).collect();
    cells.join(",")
}

fn names(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}_{i}"))
}

/// Profile columns: `x[,y], C_1.., rho, theta, Gamma, phi, S, mu_1..`.
pub fn profile_csv(system: &System, state: &State, fields: &FieldSet) -> String {
    let grid = system.grid();
    let k = state.species_count();
    let volume = &system.species().volume;
    let mut header: Vec<String> = vec!["x".into()];
    if grid.dim() == 2 {
        header.push("y".into());
    }
    header.extend(names("C", k));
    header.extend(["rho", "theta", "Gamma", "phi", "S"].map(String::from));
    header.extend(names("mu", k));
    let mut out = header.join(",");
    out.push('\n');
    for cell in 0..grid.cell_count() {
        let [x, y] = grid.cell_coords(cell);
        let mut values = vec![x];
        if grid.dim() == 2 {
            values.push(y);
        }
        values.extend(state.concentrations.iter().map(|c| c[cell]));
        let theta: f64 = state
            .concentrations
            .iter()
            .zip(volume)
            .map(|(c, v)| v * c[cell])
            .sum();
        values.extend([
            fields.charge[cell],
            theta,
            fields.gamma[cell],
            fields.phi[cell],
            fields.steric[cell],
        ]);
        values.extend(fields.chem.iter().map(|mu| mu[cell]));
        out.push_str(&row(values));
        out.push('\n');
    }
    out
}

/// `x, C_1.., ` with `C_i` replaced by `dy Σ_y C_i(x, y)`.
pub fn marginal_csv(system: &System, state: &State) -> String {
    let grid = system.grid();
    let m = grid.cells_per_axis();
    let mut header = vec!["x".to_string()];
    header.extend(names("C", state.species_count()));
    let mut out = header.join(",");
    out.push('\n');
    for ix in 0..m {
        let mut values = vec![grid.node(ix)];
        values.extend(
            state
                .concentrations
                .iter()
                .map(|c| grid.dx() * (0..m).map(|iy| c[grid.ravel(ix, iy)]).sum::<f64>()),
        );
        out.push_str(&row(values));
        out.push('\n');
    }
    out
}

pub fn trace_header(species: usize) -> String {
    let mut header: Vec<String> = ["time", "E", "D"].map(String::from).to_vec();
    header.extend(names("m", species));
    header.push("minGamma".into());
    header.extend(names("muSpread", species));
    header.push("events".into());
    header.join(",") + "\n"
}

/// Event kinds with their counts, e.g. `VoidCollapse:3;Saturation:1`, in
/// order of first appearance.
pub fn summarize_events(events: &[Event]) -> String {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for e in events {
        match counts.iter_mut().find(|(k, _)| *k == e.kind()) {
            Some((_, n)) => *n += 1,
            None => counts.push((e.kind(), 1)),
        }
    }
    let mut s = String::new();
    for (i, (k, n)) in counts.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{k}:{n}");
    }
    s
}

pub fn trace_row(r: &DiagnosticsRecord) -> String {
    let mut values = vec![r.time, r.energy, r.dissipation];
    values.extend(&r.masses);
    values.push(r.min_gamma);
    values.extend(&r.mu_spread);
    format!("{},{}\n", row(values), summarize_events(&r.events))
}

pub fn write(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)
}

/// Directory name of a sweep point: `z1=2,eta=0` becomes `z1=2_eta=0`.
pub fn point_dir(label: &str) -> String {
    if label.is_empty() {
        return "default".into();
    }
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "=.-+".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// File-name tag of an output time, e.g. `t0.5`.
pub fn time_tag(t: f64) -> String {
    format!("t{t}")
}
