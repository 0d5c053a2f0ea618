//! INI scenario files.
//!
//! ```text
//! [mesh]
//! # cartesian (nx, ny) or file (file = path)
//! kind = cartesian
//! nx = 32
//! ny = 32
//!
//! [physics]
//! lambda2 = 1
//! # isothermal or power (alpha = <real>)
//! pressure = isothermal
//! allow_degenerate = false
//!
//! [doping]
//! # zero, pn or constant (value = <real>)
//! profile = pn
//!
//! [boundary]
//! n_bottom = 2.718281828459045
//! p_bottom = 0.36787944117144233
//! n_top = 1
//! p_top = 1
//!
//! [initial]
//! # sqrt or uniform (n, p)
//! profile = sqrt
//!
//! [recombination]
//! # none, srh (scale, tau_n, tau_p, tau_c) or auger (c_n, c_p)
//! model = none
//!
//! [time]
//! dt = 0.01
//! t_end = 10
//!
//! [solver]
//! fp_tol = 1e-10
//! # auto or a fixed value
//! mu = auto
//! # direct or bicgstab
//! linear = direct
//!
//! [output]
//! csv = run.csv
//! vtk_every = 0
//! ```
//!
//! Every section is optional and falls back to the linear diode without
//! recombination. Unknown sections and keys are errors. A relative mesh path
//! is resolved against the directory of the config file; output paths are
//! resolved against the working directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use driftfv::mesh::format::read_mesh_file;
use driftfv::mesh::{Mesh, Point};
use driftfv::problem::{constant, pn_cartesian_mesh, pn_doping, Field};
use driftfv::{
    DopingProfile, MuPolicy, PnCase, PressureLaw, ProblemSpec, RecombinationModel, SolverKind, StepperConfig,
};
use ini::Ini;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Unit square with the diode contacts.
    Cartesian {
        nx: usize,
        ny: usize,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Doping {
    Zero,
    Pn,
    Constant(f64),
}

/// Boundary densities on `{y = 0}` and on the top contact. `Ψ^D` is
/// `(h(N^D) − h(P^D))/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contacts {
    pub n_bottom: f64,
    pub p_bottom: f64,
    pub n_top: f64,
    pub p_top: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initial {
    /// `v_top + (v_bottom − v_top)(1 − √y)` for both densities.
    Sqrt,
    Uniform {
        n: f64,
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: Option<PathBuf>,
    pub vtk_every: usize,
    pub vtk_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub mesh: MeshSource,
    pub law: PressureLaw,
    pub lambda2: f64,
    pub allow_degenerate: bool,
    pub doping: Doping,
    pub contacts: Contacts,
    pub initial: Initial,
    pub recombination: RecombinationModel,
    pub stepper: StepperConfig,
    pub eq_tol: f64,
    pub eq_max_iter: usize,
    pub output: Output,
}

impl Default for Config {
    fn default() -> Self {
        Config::preset(PnCase::LinearR0, DopingProfile::Zero)
    }
}

const SECTIONS: [(&str, &[&str]); 9] = [
    ("mesh", &["kind", "nx", "ny", "file"]),
    ("physics", &["lambda2", "pressure", "alpha", "allow_degenerate"]),
    ("doping", &["profile", "value"]),
    ("boundary", &["n_bottom", "p_bottom", "n_top", "p_top"]),
    ("initial", &["profile", "n", "p"]),
    ("recombination", &["model", "scale", "tau_n", "tau_p", "tau_c", "c_n", "c_p"]),
    ("time", &["dt", "t_end"]),
    (
        "solver",
        &[
            "fp_tol",
            "fp_max_iter",
            "mu",
            "damping",
            "anderson_after",
            "anderson_depth",
            "linear",
            "check_m_matrix",
            "eq_tol",
            "eq_max_iter",
        ],
    ),
    ("output", &["csv", "vtk_every", "vtk_dir", "manifest"]),
];

/// Key lookup with typed parsing and error messages naming `[section] key`.
struct Section<'a> {
    name: &'a str,
    props: Option<&'a ini::Properties>,
}

impl<'a> Section<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CliError::Config(format!("[{}] {key}: cannot parse `{v}`", self.name))),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v: f64 = self.parse(key, default)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Config(format!("[{}] {key}: `{v}` is not finite", self.name)))
        }
    }

    fn required(&self, key: &str) -> Result<f64, CliError> {
        if self.raw(key).is_none() {
            return Err(CliError::Config(format!("[{}] {key} is required", self.name)));
        }
        self.real(key, 0.0)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }
}

fn check_keys(ini: &Ini) -> Result<(), CliError> {
    let mut seen = BTreeSet::new();
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if let Some((key, _)) = props.iter().next() {
                return Err(CliError::Config(format!("key `{key}` outside of any section")));
            }
            continue;
        };
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
            return Err(CliError::Config(format!("unknown section [{section}]")));
        };
        if !seen.insert(section) {
            return Err(CliError::Config(format!("section [{section}] appears twice")));
        }
        for (key, _) in props.iter() {
            if !keys.contains(&key) {
                return Err(CliError::Config(format!("unknown key `{key}` in [{section}]")));
            }
            if props.get_all(key).count() > 1 {
                return Err(CliError::Config(format!("key `{key}` repeated in [{section}]")));
            }
        }
    }
    Ok(())
}

impl Config {
    /// One of the diode scenarios.
    pub fn preset(case: PnCase, doping: DopingProfile) -> Config {
        let (n_bottom, p_bottom, n_top, p_top) = case.boundary_values();
        Config {
            mesh: MeshSource::Cartesian { nx: 32, ny: 32 },
            law: case.law(),
            lambda2: 1.0,
            allow_degenerate: case.is_experimental(),
            doping: match doping {
                DopingProfile::Zero => Doping::Zero,
                DopingProfile::Pn => Doping::Pn,
            },
            contacts: Contacts { n_bottom, p_bottom, n_top, p_top },
            initial: Initial::Sqrt,
            recombination: case.recombination(),
            stepper: StepperConfig::default(),
            eq_tol: 1e-10,
            eq_max_iter: driftfv::equilibrium::DEFAULT_MAX_ITER,
            output: Output { csv: None, vtk_every: 0, vtk_dir: None, manifest: None },
        }
    }

    pub fn from_file(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Config::parse(&text)?;
        if let MeshSource::File(mesh) = &mut config.mesh {
            if mesh.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                *mesh = base.join(&*mesh);
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Config, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        check_keys(&ini)?;
        let section = |name| Section { name, props: ini.section(Some(name)) };
        let mut c = Config::default();

        let mesh = section("mesh");
        c.mesh = match mesh.raw("kind").unwrap_or("cartesian") {
            "cartesian" => MeshSource::Cartesian { nx: mesh.parse("nx", 32)?, ny: mesh.parse("ny", 32)? },
            "file" => MeshSource::File(
                mesh.path("file").ok_or_else(|| CliError::Config("[mesh] kind = file needs `file`".into()))?,
            ),
            other => return Err(CliError::Config(format!("[mesh] kind: unknown `{other}` (cartesian or file)"))),
        };

        let physics = section("physics");
        c.lambda2 = physics.real("lambda2", 1.0)?;
        c.allow_degenerate = physics.parse("allow_degenerate", false)?;
        c.law = match physics.raw("pressure").unwrap_or("isothermal") {
            "isothermal" => {
                if physics.raw("alpha").is_some() {
                    return Err(CliError::Config("[physics] alpha needs pressure = power".into()));
                }
                PressureLaw::Isothermal
            }
            "power" => {
                let alpha = physics.required("alpha")?;
                PressureLaw::power(alpha)
                    .ok_or_else(|| CliError::Config(format!("[physics] alpha must exceed 1, got {alpha}")))?
            }
            other => {
                return Err(CliError::Config(format!("[physics] pressure: unknown `{other}` (isothermal or power)")))
            }
        };

        let doping = section("doping");
        c.doping = match doping.raw("profile").unwrap_or("zero") {
            "zero" => Doping::Zero,
            "pn" => Doping::Pn,
            "constant" => Doping::Constant(doping.required("value")?),
            other => {
                return Err(CliError::Config(format!("[doping] profile: unknown `{other}` (zero, pn or constant)")))
            }
        };
        if !matches!(c.doping, Doping::Constant(_)) && doping.raw("value").is_some() {
            return Err(CliError::Config("[doping] value needs profile = constant".into()));
        }

        let boundary = section("boundary");
        let d = c.contacts;
        c.contacts = Contacts {
            n_bottom: boundary.real("n_bottom", d.n_bottom)?,
            p_bottom: boundary.real("p_bottom", d.p_bottom)?,
            n_top: boundary.real("n_top", d.n_top)?,
            p_top: boundary.real("p_top", d.p_top)?,
        };

        let initial = section("initial");
        c.initial = match initial.raw("profile").unwrap_or("sqrt") {
            "sqrt" => {
                if initial.raw("n").is_some() || initial.raw("p").is_some() {
                    return Err(CliError::Config("[initial] n and p need profile = uniform".into()));
                }
                Initial::Sqrt
            }
            "uniform" => Initial::Uniform { n: initial.required("n")?, p: initial.required("p")? },
            other => return Err(CliError::Config(format!("[initial] profile: unknown `{other}` (sqrt or uniform)"))),
        };

        let rec = section("recombination");
        let model = rec.raw("model").unwrap_or("none");
        let allowed: &[&str] = match model {
            "none" => &["model"],
            "srh" => &["model", "scale", "tau_n", "tau_p", "tau_c"],
            "auger" => &["model", "c_n", "c_p"],
            other => {
                return Err(CliError::Config(format!("[recombination] model: unknown `{other}` (none, srh or auger)")))
            }
        };
        if let Some(props) = rec.props {
            if let Some((key, _)) = props.iter().find(|(k, _)| !allowed.contains(k)) {
                return Err(CliError::Config(format!("[recombination] {key} does not apply to model = {model}")));
            }
        }
        c.recombination = match model {
            "srh" => {
                let RecombinationModel::Srh { scale, tau_n, tau_p, tau_c } = RecombinationModel::PN_SRH else {
                    unreachable!()
                };
                RecombinationModel::Srh {
                    scale: rec.real("scale", scale)?,
                    tau_n: rec.real("tau_n", tau_n)?,
                    tau_p: rec.real("tau_p", tau_p)?,
                    tau_c: rec.real("tau_c", tau_c)?,
                }
            }
            "auger" => {
                let RecombinationModel::Auger { c_n, c_p } = RecombinationModel::PN_AUGER else { unreachable!() };
                RecombinationModel::Auger { c_n: rec.real("c_n", c_n)?, c_p: rec.real("c_p", c_p)? }
            }
            _ => RecombinationModel::None,
        };

        let time = section("time");
        let s = &mut c.stepper;
        s.dt = time.real("dt", s.dt)?;
        s.t_end = time.real("t_end", s.t_end)?;
        s.dt_max = s.dt;

        let solver = section("solver");
        s.fp_tol = solver.real("fp_tol", s.fp_tol)?;
        s.fp_max_iter = solver.parse("fp_max_iter", s.fp_max_iter)?;
        s.damping = solver.real("damping", s.damping)?;
        s.anderson_after = solver.parse("anderson_after", s.anderson_after)?;
        s.anderson_depth = solver.parse("anderson_depth", s.anderson_depth)?;
        s.check_m_matrix = solver.parse("check_m_matrix", s.check_m_matrix)?;
        s.mu_policy = match solver.raw("mu").unwrap_or("auto") {
            "auto" => MuPolicy::Auto,
            _ => MuPolicy::Fixed(solver.real("mu", 0.0)?),
        };
        s.solver = match solver.raw("linear").unwrap_or("direct") {
            "direct" => SolverKind::Direct,
            "bicgstab" | "iterative" => SolverKind::BiCgStab,
            other => return Err(CliError::Config(format!("[solver] linear: unknown `{other}` (direct or bicgstab)"))),
        };
        c.eq_tol = solver.real("eq_tol", c.eq_tol)?;
        c.eq_max_iter = solver.parse("eq_max_iter", c.eq_max_iter)?;
        if !(c.eq_tol > 0.0) || c.eq_max_iter == 0 {
            return Err(CliError::Config("[solver] eq_tol and eq_max_iter must be positive".into()));
        }

        let output = section("output");
        c.output = Output {
            csv: output.path("csv"),
            vtk_every: output.parse("vtk_every", 0)?,
            vtk_dir: output.path("vtk_dir"),
            manifest: output.path("manifest"),
        };
        Ok(c)
    }

    /// Canonical INI text listing every resolved value; parses back to an
    /// equal config.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let mut put = |section: &str, pairs: &[(&str, String)]| {
            writeln!(s, "[{section}]").unwrap();
            for (k, v) in pairs {
                writeln!(s, "{k} = {v}").unwrap();
            }
            writeln!(s).unwrap();
        };
        let path = |p: &Path| p.display().to_string();
        match &self.mesh {
            MeshSource::Cartesian { nx, ny } => {
                put("mesh", &[("kind", "cartesian".into()), ("nx", nx.to_string()), ("ny", ny.to_string())])
            }
            MeshSource::File(f) => put("mesh", &[("kind", "file".into()), ("file", path(f))]),
        }
        let mut physics = vec![("lambda2", format!("{:?}", self.lambda2))];
        match self.law {
            PressureLaw::Isothermal => physics.push(("pressure", "isothermal".into())),
            PressureLaw::Power { alpha } => {
                physics.push(("pressure", "power".into()));
                physics.push(("alpha", format!("{alpha:?}")));
            }
        }
        physics.push(("allow_degenerate", self.allow_degenerate.to_string()));
        put("physics", &physics);
        match self.doping {
            Doping::Zero => put("doping", &[("profile", "zero".into())]),
            Doping::Pn => put("doping", &[("profile", "pn".into())]),
            Doping::Constant(v) => put("doping", &[("profile", "constant".into()), ("value", format!("{v:?}"))]),
        }
        let b = self.contacts;
        put(
            "boundary",
            &[
                ("n_bottom", format!("{:?}", b.n_bottom)),
                ("p_bottom", format!("{:?}", b.p_bottom)),
                ("n_top", format!("{:?}", b.n_top)),
                ("p_top", format!("{:?}", b.p_top)),
            ],
        );
        match self.initial {
            Initial::Sqrt => put("initial", &[("profile", "sqrt".into())]),
            Initial::Uniform { n, p } => {
                put("initial", &[("profile", "uniform".into()), ("n", format!("{n:?}")), ("p", format!("{p:?}"))])
            }
        }
        match self.recombination {
            RecombinationModel::None => put("recombination", &[("model", "none".into())]),
            RecombinationModel::Srh { scale, tau_n, tau_p, tau_c } => put(
                "recombination",
                &[
                    ("model", "srh".into()),
                    ("scale", format!("{scale:?}")),
                    ("tau_n", format!("{tau_n:?}")),
                    ("tau_p", format!("{tau_p:?}")),
                    ("tau_c", format!("{tau_c:?}")),
                ],
            ),
            RecombinationModel::Auger { c_n, c_p } => put(
                "recombination",
                &[("model", "auger".into()), ("c_n", format!("{c_n:?}")), ("c_p", format!("{c_p:?}"))],
            ),
        }
        let st = &self.stepper;
        put("time", &[("dt", format!("{:?}", st.dt)), ("t_end", format!("{:?}", st.t_end))]);
        put(
            "solver",
            &[
                ("fp_tol", format!("{:?}", st.fp_tol)),
                ("fp_max_iter", st.fp_max_iter.to_string()),
                (
                    "mu",
                    match st.mu_policy {
                        MuPolicy::Auto => "auto".into(),
                        MuPolicy::Fixed(mu) => format!("{mu:?}"),
                    },
                ),
                ("damping", format!("{:?}", st.damping)),
                ("anderson_after", st.anderson_after.to_string()),
                ("anderson_depth", st.anderson_depth.to_string()),
                (
                    "linear",
                    match st.solver {
                        SolverKind::Direct => "direct".into(),
                        SolverKind::BiCgStab => "bicgstab".into(),
                    },
                ),
                ("check_m_matrix", st.check_m_matrix.to_string()),
                ("eq_tol", format!("{:?}", self.eq_tol)),
                ("eq_max_iter", self.eq_max_iter.to_string()),
            ],
        );
        let o = &self.output;
        let mut out = Vec::new();
        if let Some(p) = &o.csv {
            out.push(("csv", path(p)));
        }
        out.push(("vtk_every", o.vtk_every.to_string()));
        if let Some(p) = &o.vtk_dir {
            out.push(("vtk_dir", path(p)));
        }
        if let Some(p) = &o.manifest {
            out.push(("manifest", path(p)));
        }
        put("output", &out);
        s.pop();
        s
    }

    pub fn build_mesh(&self) -> Result<Mesh, CliError> {
        match &self.mesh {
            MeshSource::Cartesian { nx, ny } => pn_cartesian_mesh(*nx, *ny).map_err(CliError::Mesh),
            MeshSource::File(path) => {
                if !path.is_file() {
                    return Err(CliError::Config(format!("mesh file {} does not exist", path.display())));
                }
                read_mesh_file(path).map_err(CliError::Mesh)
            }
        }
    }

    pub fn spec(&self) -> ProblemSpec {
        let law = self.law;
        let b = self.contacts;
        let profile =
            |v0: f64, v1: f64| -> Field { Arc::new(move |x: Point| v1 + (v0 - v1) * (1.0 - x[1].max(0.0).sqrt())) };
        let n_boundary = profile(b.n_bottom, b.n_top);
        let p_boundary = profile(b.p_bottom, b.p_top);
        let (nd, pd) = (n_boundary.clone(), p_boundary.clone());
        let psi_boundary: Field = Arc::new(move |x| 0.5 * (law.enthalpy(nd(x)) - law.enthalpy(pd(x))));
        let (n_initial, p_initial) = match self.initial {
            Initial::Sqrt => (n_boundary.clone(), p_boundary.clone()),
            Initial::Uniform { n, p } => (constant(n), constant(p)),
        };
        ProblemSpec {
            law,
            lambda2: self.lambda2,
            doping: match self.doping {
                Doping::Zero => constant(0.0),
                Doping::Pn => Arc::new(pn_doping),
                Doping::Constant(v) => constant(v),
            },
            n_boundary,
            p_boundary,
            psi_boundary,
            n_initial,
            p_initial,
            recombination: self.recombination,
            allow_degenerate: self.allow_degenerate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_linear_diode() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::preset(PnCase::LinearR0, DopingProfile::Zero));
        assert_eq!(c.stepper.num_steps(), 1000);
    }

    #[test]
    fn echo_round_trips_for_every_preset() {
        for case in PnCase::ALL {
            for doping in [DopingProfile::Zero, DopingProfile::Pn] {
                let c = Config::preset(case, doping);
                assert_eq!(Config::parse(&c.to_ini()).unwrap(), c, "{case:?} {doping:?}");
            }
        }
        let mut c = Config::preset(PnCase::LinearSrh, DopingProfile::Pn);
        c.mesh = MeshSource::File("/tmp/m.txt".into());
        c.doping = Doping::Constant(-0.25);
        c.initial = Initial::Uniform { n: 1.5, p: 0.1 + 0.2 };
        c.stepper.mu_policy = MuPolicy::Fixed(0.3);
        c.stepper.solver = SolverKind::BiCgStab;
        c.output = Output { csv: Some("a.csv".into()), vtk_every: 5, vtk_dir: Some("v".into()), manifest: None };
        assert_eq!(Config::parse(&c.to_ini()).unwrap(), c);
    }

    #[test]
    fn parses_power_law_and_recombination() {
        let c = Config::parse(
            "[physics]\npressure = power\nalpha = 1.5\n[recombination]\nmodel = srh\ntau_c = 2\n[time]\ndt = 0.05\nt_end = 1\n",
        )
        .unwrap();
        assert_eq!(c.law, PressureLaw::Power { alpha: 1.5 });
        assert_eq!(c.recombination, RecombinationModel::Srh { scale: 10.0, tau_n: 1.0, tau_p: 1.0, tau_c: 2.0 });
        assert_eq!(c.stepper.num_steps(), 20);
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        for text in [
            "[mesh]\nnxx = 3\n",
            "[meshes]\nnx = 3\n",
            "nx = 3\n",
            "[mesh]\nnx = 3\nnx = 4\n",
            "[recombination]\nmodel = auger\nscale = 3\n",
            "[physics]\nalpha = 2\n",
            "[physics]\npressure = power\n",
            "[physics]\npressure = power\nalpha = 1\n",
            "[time]\ndt = abc\n",
            "[time]\ndt = inf\n",
            "[mesh]\nkind = file\n",
            "[doping]\nvalue = 1\n",
        ] {
            assert!(matches!(Config::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn relative_mesh_path_follows_the_config_file() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let cfg = dir.join("a.cfg");
        std::fs::write(&cfg, "[mesh]\nkind = file\nfile = grid.msh\n").unwrap();
        let c = Config::from_file(&cfg).unwrap();
        assert_eq!(c.mesh, MeshSource::File(dir.join("grid.msh")));
        assert!(matches!(c.build_mesh(), Err(CliError::Config(_))));
    }
}
