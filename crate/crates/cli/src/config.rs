//! Run configuration: a TOML document with fixed sections, validated with
//! accumulated (not fail-fast) errors, each carrying its line number.

use std::fmt;
use std::path::PathBuf;

use periflow::{GasModel, GeometryError, NozzleGeometry, PicardOpts, WallSeries};
use toml_edit::{ImDocument, Item, TableLike};

#[derive(Debug, Clone)]
pub struct ConfigIssue {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.key, self.message)
    }
}

/// All problems found in one pass over the document.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.0 {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub enum B0Spec {
    Constant(f64),
    Samples(Vec<f64>),
}

impl B0Spec {
    /// Uniform samples of the datum on `[0, 1]`.
    pub fn samples(&self) -> Vec<f64> {
        match self {
            B0Spec::Constant(v) => vec![*v; 33],
            B0Spec::Samples(v) => v.clone(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, B0Spec::Constant(_))
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub nx: usize,
    pub ny: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub relax: f64,
    pub theta0_frac: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PicardOpts::default();
        SolverConfig {
            nx: 32,
            ny: 32,
            tol: p.tol,
            max_iter: p.max_iter,
            relax: p.relax,
            theta0_frac: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn picard_opts(&self) -> PicardOpts {
        PicardOpts {
            tol: self.tol,
            max_iter: self.max_iter,
            relax: self.relax,
            ..PicardOpts::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: Option<f64>,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            tol: 1e-8,
            max_iter: 50,
            damping: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub gas: GasModel,
    pub geometry: NozzleGeometry,
    pub mass_flux: f64,
    pub b0: B0Spec,
    pub eps_warn: f64,
    pub solver: SolverConfig,
    pub fixedpoint: FixedPointConfig,
    pub output: OutputConfig,
}

struct Walker<'a> {
    text: &'a str,
    issues: Vec<ConfigIssue>,
}

impl<'a> Walker<'a> {
    fn line_at(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())]
            .bytes()
            .filter(|&b| b == b'\n')
            .count()
            + 1
    }

    fn line_of_item(&self, item: &Item) -> usize {
        item.span().map(|s| self.line_at(s.start)).unwrap_or(0)
    }

    fn push(&mut self, line: usize, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn section<'t>(
        &mut self,
        table: &'t dyn TableLike,
        name: &str,
        required: bool,
    ) -> Option<&'t dyn TableLike> {
        match table.get(name) {
            Some(item) => match item.as_table_like() {
                Some(t) => Some(t),
                None => {
                    let line = self.line_of_item(item);
                    self.push(line, name, "expected a table");
                    None
                }
            },
            None => {
                if required {
                    self.push(0, name, "missing required section");
                }
                None
            }
        }
    }

    fn reject_unknown(&mut self, table: &dyn TableLike, path: &str, known: &[&str]) {
        for (key, item) in table.iter() {
            if !known.contains(&key) {
                let line = self.line_of_item(item);
                let full = if path.is_empty() {
                    key.to_string()
                } else {
                    format!("{path}.{key}")
                };
                self.push(line, &full, "unknown key");
            }
        }
    }

    fn f64_at(&mut self, table: &dyn TableLike, path: &str, key: &str) -> Option<f64> {
        let item = table.get(key)?;
        let v = item
            .as_float()
            .or_else(|| item.as_integer().map(|i| i as f64));
        if v.is_none() {
            let line = self.line_of_item(item);
            self.push(line, &format!("{path}.{key}"), "expected a number");
        }
        v
    }

    fn usize_at(&mut self, table: &dyn TableLike, path: &str, key: &str) -> Option<usize> {
        let item = table.get(key)?;
        match item.as_integer() {
            Some(i) if i >= 0 => Some(i as usize),
            _ => {
                let line = self.line_of_item(item);
                self.push(
                    line,
                    &format!("{path}.{key}"),
                    "expected a nonnegative integer",
                );
                None
            }
        }
    }

    fn str_at(&mut self, table: &dyn TableLike, path: &str, key: &str) -> Option<String> {
        let item = table.get(key)?;
        match item.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                let line = self.line_of_item(item);
                self.push(line, &format!("{path}.{key}"), "expected a string");
                None
            }
        }
    }

    fn f64_array_at(&mut self, table: &dyn TableLike, path: &str, key: &str) -> Option<Vec<f64>> {
        let item = table.get(key)?;
        let line = self.line_of_item(item);
        match item.as_array() {
            Some(arr) => {
                let mut out = Vec::with_capacity(arr.len());
                for v in arr.iter() {
                    match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
                        Some(x) => out.push(x),
                        None => {
                            self.push(line, &format!("{path}.{key}"), "expected numeric entries");
                            return None;
                        }
                    }
                }
                Some(out)
            }
            None => {
                self.push(line, &format!("{path}.{key}"), "expected an array");
                None
            }
        }
    }

    fn line_of_key(&mut self, table: &dyn TableLike, key: &str) -> usize {
        table
            .get(key)
            .map(|item| self.line_of_item(item))
            .unwrap_or(0)
    }
}

fn parse_wall(w: &mut Walker, table: &dyn TableLike, path: &str) -> WallSeries {
    w.reject_unknown(table, path, &["mean", "cos", "sin"]);
    WallSeries {
        mean: w.f64_at(table, path, "mean").unwrap_or(0.0),
        cos: w.f64_array_at(table, path, "cos").unwrap_or_default(),
        sin: w.f64_array_at(table, path, "sin").unwrap_or_default(),
    }
}

/// Parse and fully validate a configuration document. On failure, every
/// detected problem is returned, each with the line it sits on.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let doc = match ImDocument::parse(text) {
        Ok(doc) => doc,
        Err(e) => {
            let line = e
                .span()
                .map(|s| text[..s.start].bytes().filter(|&b| b == b'\n').count() + 1)
                .unwrap_or(0);
            return Err(ConfigErrors(vec![ConfigIssue {
                line,
                key: "<syntax>".into(),
                message: e.message().to_string(),
            }]));
        }
    };
    let mut w = Walker {
        text,
        issues: Vec::new(),
    };
    let root: &dyn TableLike = doc.as_table();
    w.reject_unknown(
        root,
        "",
        &["gas", "nozzle", "flow", "solver", "fixedpoint", "output"],
    );

    // --- gas ---
    let mut gas = None;
    if let Some(t) = w.section(root, "gas", true) {
        w.reject_unknown(t, "gas", &["kind", "gamma", "A", "c"]);
        let kind = w.str_at(t, "gas", "kind");
        match kind.as_deref() {
            Some("polytropic") => {
                let gamma = w.f64_at(t, "gas", "gamma");
                let a = w.f64_at(t, "gas", "A");
                if t.get("c").is_some() {
                    let line = w.line_of_key(t, "c");
                    w.push(line, "gas.c", "only applies to isothermal gas");
                }
                match (gamma, a) {
                    (Some(g), Some(a)) => {
                        if g <= 1.0 {
                            let line = w.line_of_key(t, "gamma");
                            w.push(line, "gas.gamma", "gamma must exceed 1");
                        } else if a <= 0.0 {
                            let line = w.line_of_key(t, "A");
                            w.push(line, "gas.A", "pressure scale must be positive");
                        } else {
                            gas = GasModel::polytropic(g, a).ok();
                        }
                    }
                    _ => {
                        if gamma.is_none() && t.get("gamma").is_none() {
                            w.push(0, "gas.gamma", "required for polytropic gas");
                        }
                        if a.is_none() && t.get("A").is_none() {
                            w.push(0, "gas.A", "required for polytropic gas");
                        }
                    }
                }
            }
            Some("isothermal") => {
                for k in ["gamma", "A"] {
                    if t.get(k).is_some() {
                        let line = w.line_of_key(t, k);
                        w.push(line, &format!("gas.{k}"), "only applies to polytropic gas");
                    }
                }
                match w.f64_at(t, "gas", "c") {
                    Some(c) if c > 0.0 => gas = GasModel::isothermal(c).ok(),
                    Some(_) => {
                        let line = w.line_of_key(t, "c");
                        w.push(line, "gas.c", "sound speed must be positive");
                    }
                    None => {
                        if t.get("c").is_none() {
                            w.push(0, "gas.c", "required for isothermal gas");
                        }
                    }
                }
            }
            Some(other) => {
                let line = w.line_of_key(t, "kind");
                w.push(
                    line,
                    "gas.kind",
                    format!("unknown gas kind {other:?} (polytropic or isothermal)"),
                );
            }
            None => {
                if t.get("kind").is_none() {
                    w.push(0, "gas.kind", "missing gas kind");
                }
            }
        }
    }

    // --- nozzle ---
    let mut geometry = None;
    if let Some(t) = w.section(root, "nozzle", true) {
        w.reject_unknown(t, "nozzle", &["period", "f1", "f2"]);
        let period = w.f64_at(t, "nozzle", "period");
        if period.is_none() && t.get("period").is_none() {
            w.push(0, "nozzle.period", "missing period");
        }
        let f1 = w
            .section(t, "f1", true)
            .map(|wt| parse_wall(&mut w, wt, "nozzle.f1"));
        let f2 = w
            .section(t, "f2", true)
            .map(|wt| parse_wall(&mut w, wt, "nozzle.f2"));
        if let (Some(period), Some(f1), Some(f2)) = (period, f1, f2) {
            if period <= 0.0 {
                let line = w.line_of_key(t, "period");
                w.push(line, "nozzle.period", "period must be positive");
            } else {
                match NozzleGeometry::new(period, f1, f2) {
                    Ok(g) => geometry = Some(g),
                    Err(GeometryError::NonpositiveGap(g)) => {
                        w.push(0, "nozzle", format!("walls touch: certified gap {g:.3e}"));
                    }
                    Err(e) => w.push(0, "nozzle", e.to_string()),
                }
            }
        }
    }

    // --- flow ---
    let mut mass_flux = None;
    let mut b0 = None;
    let mut eps_warn = 0.1;
    if let Some(t) = w.section(root, "flow", true) {
        w.reject_unknown(t, "flow", &["mass_flux", "B0"]);
        mass_flux = w.f64_at(t, "flow", "mass_flux");
        if mass_flux.is_none() && t.get("mass_flux").is_none() {
            w.push(0, "flow.mass_flux", "missing mass flux");
        }
        if let Some(m) = mass_flux {
            if m <= 0.0 {
                let line = w.line_of_key(t, "mass_flux");
                w.push(line, "flow.mass_flux", "mass flux must be positive");
                mass_flux = None;
            }
        }
        if let Some(bt) = w.section(t, "B0", true) {
            w.reject_unknown(bt, "flow.B0", &["constant", "samples", "eps_warn"]);
            if let Some(e) = w.f64_at(bt, "flow.B0", "eps_warn") {
                if e >= 0.0 {
                    eps_warn = e;
                } else {
                    let line = w.line_of_key(bt, "eps_warn");
                    w.push(line, "flow.B0.eps_warn", "must be nonnegative");
                }
            }
            let constant = w.f64_at(bt, "flow.B0", "constant");
            let samples = w.f64_array_at(bt, "flow.B0", "samples");
            match (constant, samples) {
                (Some(_), Some(_)) => {
                    let line = w.line_of_key(bt, "samples");
                    w.push(line, "flow.B0", "give either constant or samples, not both");
                }
                (Some(c), None) => b0 = Some(B0Spec::Constant(c)),
                (None, Some(s)) => {
                    if s.len() < 2 {
                        let line = w.line_of_key(bt, "samples");
                        w.push(line, "flow.B0.samples", "need at least two samples");
                    } else {
                        b0 = Some(B0Spec::Samples(s));
                    }
                }
                (None, None) => {
                    if bt.get("constant").is_none() && bt.get("samples").is_none() {
                        w.push(0, "flow.B0", "give either constant or samples");
                    }
                }
            }
        }
    }

    // --- solver ---
    let mut solver = SolverConfig::default();
    if let Some(t) = w.section(root, "solver", false) {
        w.reject_unknown(
            t,
            "solver",
            &["nx", "ny", "tol", "max_iter", "relax", "theta0_frac"],
        );
        if let Some(nx) = w.usize_at(t, "solver", "nx") {
            if nx < 8 {
                let line = w.line_of_key(t, "nx");
                w.push(line, "solver.nx", "need at least 8 cells");
            } else {
                solver.nx = nx;
            }
        }
        if let Some(ny) = w.usize_at(t, "solver", "ny") {
            if ny < 8 {
                let line = w.line_of_key(t, "ny");
                w.push(line, "solver.ny", "need at least 8 cells");
            } else {
                solver.ny = ny;
            }
        }
        if let Some(tol) = w.f64_at(t, "solver", "tol") {
            if tol > 0.0 {
                solver.tol = tol;
            } else {
                let line = w.line_of_key(t, "tol");
                w.push(line, "solver.tol", "must be positive");
            }
        }
        if let Some(mi) = w.usize_at(t, "solver", "max_iter") {
            solver.max_iter = mi;
        }
        if let Some(r) = w.f64_at(t, "solver", "relax") {
            if r > 0.0 && r <= 1.0 {
                solver.relax = r;
            } else {
                let line = w.line_of_key(t, "relax");
                w.push(line, "solver.relax", "must lie in (0, 1]");
            }
        }
        if let Some(f) = w.f64_at(t, "solver", "theta0_frac") {
            if f > 0.0 && f <= 1.0 {
                solver.theta0_frac = f;
            } else {
                let line = w.line_of_key(t, "theta0_frac");
                w.push(line, "solver.theta0_frac", "must lie in (0, 1]");
            }
        }
    }

    // --- fixedpoint ---
    let mut fixedpoint = FixedPointConfig::default();
    if let Some(t) = w.section(root, "fixedpoint", false) {
        w.reject_unknown(t, "fixedpoint", &["tol", "max_iter", "damping"]);
        if let Some(tol) = w.f64_at(t, "fixedpoint", "tol") {
            if tol > 0.0 {
                fixedpoint.tol = tol;
            } else {
                let line = w.line_of_key(t, "tol");
                w.push(line, "fixedpoint.tol", "must be positive");
            }
        }
        if let Some(mi) = w.usize_at(t, "fixedpoint", "max_iter") {
            fixedpoint.max_iter = mi;
        }
        if let Some(d) = w.f64_at(t, "fixedpoint", "damping") {
            if d > 0.0 && d <= 1.0 {
                fixedpoint.damping = Some(d);
            } else {
                let line = w.line_of_key(t, "damping");
                w.push(line, "fixedpoint.damping", "must lie in (0, 1]");
            }
        }
    }

    // --- output ---
    let mut output = OutputConfig { path: None };
    if let Some(t) = w.section(root, "output", false) {
        w.reject_unknown(t, "output", &["path", "format"]);
        if let Some(p) = w.str_at(t, "output", "path") {
            output.path = Some(PathBuf::from(p));
        }
        if let Some(f) = w.str_at(t, "output", "format") {
            if f != "csv" {
                let line = w.line_of_key(t, "format");
                w.push(line, "output.format", "only csv is supported");
            }
        }
    }

    if !w.issues.is_empty() {
        return Err(ConfigErrors(w.issues));
    }
    Ok(RunConfig {
        gas: gas.expect("validated"),
        geometry: geometry.expect("validated"),
        mass_flux: mass_flux.expect("validated"),
        b0: b0.expect("validated"),
        eps_warn,
        solver,
        fixedpoint,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[gas]
kind = "polytropic"
gamma = 2.0
A = 0.5

[nozzle]
period = 1.0
[nozzle.f1]
mean = 0.0
[nozzle.f2]
mean = 1.0

[flow]
mass_flux = 0.5
[flow.B0]
constant = 1.5
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver.nx, 32);
        assert_eq!(cfg.solver.ny, 32);
        assert_eq!(cfg.fixedpoint.max_iter, 50);
        assert!(cfg.b0.is_constant());
        assert_eq!(cfg.mass_flux, 0.5);
        assert!(matches!(cfg.gas, GasModel::Polytropic { .. }));
    }

    #[test]
    fn bad_gamma_is_rejected_with_message_and_line() {
        let text = MINIMAL.replace("gamma = 2.0", "gamma = 0.9");
        let err = parse_config(&text).unwrap_err();
        let issue = err
            .0
            .iter()
            .find(|i| i.key == "gas.gamma")
            .expect("gamma issue");
        assert!(issue.message.contains("exceed 1"));
        assert_eq!(issue.line, 4);
    }

    #[test]
    fn negative_mass_flux_is_rejected() {
        let text = MINIMAL.replace("mass_flux = 0.5", "mass_flux = -0.5");
        let err = parse_config(&text).unwrap_err();
        assert!(err.0.iter().any(|i| i.key == "flow.mass_flux"));
    }

    #[test]
    fn errors_accumulate_not_fail_fast() {
        let text = MINIMAL
            .replace("gamma = 2.0", "gamma = 0.5")
            .replace("mass_flux = 0.5", "mass_flux = -1.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.0.len() >= 2, "expected both issues, got {:?}", err.0);
    }

    #[test]
    fn unknown_keys_are_located() {
        let text = format!("{MINIMAL}\n[solver]\nnx = 16\nwibble = 3\n");
        let err = parse_config(&text).unwrap_err();
        let issue = err
            .0
            .iter()
            .find(|i| i.key == "solver.wibble")
            .expect("unknown-key issue");
        assert!(issue.message.contains("unknown"));
        assert!(issue.line > 0);
    }

    #[test]
    fn missing_section_is_reported() {
        let text = MINIMAL.replace("[flow]\nmass_flux = 0.5\n[flow.B0]\nconstant = 1.5\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.0.iter().any(|i| i.key == "flow"), "issues: {:?}", err.0);
    }

    #[test]
    fn misspelled_section_is_both_unknown_and_missing() {
        let text = MINIMAL.replace("[flow]", "[floe]");
        let err = parse_config(&text).unwrap_err();
        // "floe" is unknown and the real flow table (implicitly created by
        // [flow.B0]) now lacks its mass flux.
        assert!(err.0.iter().any(|i| i.key == "floe"));
        assert!(err.0.iter().any(|i| i.key == "flow.mass_flux"));
    }

    #[test]
    fn isothermal_gas_parses() {
        let text = MINIMAL.replace(
            "kind = \"polytropic\"\ngamma = 2.0\nA = 0.5",
            "kind = \"isothermal\"\nc = 1.0",
        );
        let cfg = parse_config(&text).unwrap();
        assert!(matches!(cfg.gas, GasModel::Isothermal { .. }));
    }

    #[test]
    fn sampled_b0_parses() {
        let text = MINIMAL.replace("constant = 1.5", "samples = [1.5, 1.51, 1.5]");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.b0.samples().len(), 3);
    }
}
