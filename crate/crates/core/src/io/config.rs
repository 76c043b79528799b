//! Plain `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::assembly::{Load, LoadSpec, TimeProfile};
use crate::material::{isotropic_tensor, MaterialField, PlaneMode, ViscoplasticLaw};
use crate::mesh::{build_notched_rectangle, load_mesh, match_contact_pairs, Mesh2D, NotchedRectangle};
use crate::tensor::SymTensor2;
use crate::time::{Problem, ProblemSpec, Quadrature, Scheme, SolverConfig, TimeError, TimeGrid};
use crate::vi::{StepSize, VIConfig, VIMethod};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: {key}: {msg}")]
    Type { line: usize, key: String, msg: String },
    #[error("line {line}: {key}: {msg}")]
    Range { line: usize, key: String, msg: String },
    #[error("missing required key '{key}'{}", line.map(|l| format!(" (needed by line {l})")).unwrap_or_default())]
    Missing { key: String, line: Option<usize> },
    #[error("line {line}: mesh file '{}' cannot be read: {msg}", path.display())]
    MissingMesh { line: usize, path: PathBuf, msg: String },
    #[error("mesh: {0}")]
    Mesh(String),
    #[error(transparent)]
    Problem(#[from] TimeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutField {
    U,
    Sigma,
    Eta,
    Lambda,
}

impl OutField {
    pub const ALL: [OutField; 4] = [OutField::U, OutField::Sigma, OutField::Eta, OutField::Lambda];

    pub fn name(self) -> &'static str {
        match self {
            OutField::U => "u",
            OutField::Sigma => "sigma",
            OutField::Eta => "eta",
            OutField::Lambda => "lambda",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        OutField::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    Zero,
    Linear,
    Perzyna,
}

/// Per-region engineering constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMaterial {
    pub youngs: f64,
    pub poisson: f64,
}

/// Every setting of a run, defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh_file: Option<PathBuf>,
    pub mesh_file_line: Option<usize>,
    pub geometry: NotchedRectangle,
    pub contact_tol: Option<f64>,
    pub contact_gap: Option<f64>,
    pub youngs: f64,
    pub poisson: f64,
    pub mode: PlaneMode,
    pub regions: BTreeMap<u32, RegionMaterial>,
    pub law_kind: LawKind,
    pub kappa: f64,
    pub sigma_y: Option<f64>,
    pub body: [f64; 2],
    pub traction: [f64; 2],
    pub profile: TimeProfile,
    pub sigma0: SymTensor2,
    pub vi: VIConfig,
    pub dt: f64,
    pub horizon: f64,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    pub quadrature: Quadrature,
    pub scheme: Scheme,
    pub out_dir: PathBuf,
    pub out_fields: Vec<OutField>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        RunConfig {
            mesh_file: None,
            mesh_file_line: None,
            geometry: NotchedRectangle::default(),
            contact_tol: None,
            contact_gap: None,
            youngs: 1.0,
            poisson: 0.3,
            mode: PlaneMode::PlaneStrain,
            regions: BTreeMap::new(),
            law_kind: LawKind::Zero,
            kappa: 1.0,
            sigma_y: None,
            body: [0.0, 0.0],
            traction: [0.0, -1.0],
            profile: TimeProfile::Constant,
            sigma0: SymTensor2::ZERO,
            vi: solver.vi,
            dt: 0.02,
            horizon: 1.0,
            fp_tol: solver.fp_tol,
            fp_max_iters: solver.fp_max_iters,
            quadrature: solver.quadrature,
            scheme: solver.scheme,
            out_dir: PathBuf::from("out"),
            out_fields: OutField::ALL.to_vec(),
            seed: 42,
        }
    }
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn type_err(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::Type {
            line: self.line,
            key: self.key.to_string(),
            msg: msg.into(),
        }
    }

    fn range_err(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::Range {
            line: self.line,
            key: self.key.to_string(),
            msg: msg.into(),
        }
    }

    fn float(&self) -> Result<f64, ConfigError> {
        match self.value.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.type_err(format!("expected a number, got '{}'", self.value))),
        }
    }

    fn positive(&self) -> Result<f64, ConfigError> {
        let x = self.float()?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.range_err(format!("must be positive, got {x}")))
        }
    }

    fn nonnegative(&self) -> Result<f64, ConfigError> {
        let x = self.float()?;
        if x >= 0.0 {
            Ok(x)
        } else {
            Err(self.range_err(format!("must be nonnegative, got {x}")))
        }
    }

    fn count(&self) -> Result<usize, ConfigError> {
        let n: usize = self
            .value
            .parse()
            .map_err(|_| self.type_err(format!("expected a count, got '{}'", self.value)))?;
        if n == 0 {
            return Err(self.range_err("must be at least 1"));
        }
        Ok(n)
    }

    fn tuple<const N: usize>(&self) -> Result<[f64; N], ConfigError> {
        let v = self.value.trim();
        let inner = v
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| self.type_err(format!("expected ({N} comma-separated numbers), got '{v}'")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != N {
            return Err(self.type_err(format!("expected {N} components, got {}", parts.len())));
        }
        let mut out = [0.0; N];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = match p.parse::<f64>() {
                Ok(x) if x.is_finite() => x,
                _ => return Err(self.type_err(format!("cannot parse component '{p}'"))),
            };
        }
        Ok(out)
    }
}

fn fmt_tuple(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("({})", parts.join(", "))
}

/// Parses `key = value` lines. `#` starts a comment. Unknown and repeated
/// keys are errors; every error carries its line number.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut law_line = None;
    let mut region_lines: BTreeMap<u32, (Option<f64>, Option<f64>, usize)> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected 'key = value', got '{content}'"),
        })?;
        let e = Entry {
            line,
            key: key.trim(),
            value: value.trim(),
        };
        if e.key.is_empty() {
            return Err(ConfigError::Syntax { line, msg: "empty key".into() });
        }
        if seen.insert(e.key.to_string(), line).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                key: e.key.to_string(),
            });
        }
        match e.key {
            "mesh.file" => {
                cfg.mesh_file = Some(PathBuf::from(e.value));
                cfg.mesh_file_line = Some(line);
            }
            "mesh.width" => cfg.geometry.width = e.positive()?,
            "mesh.height" => cfg.geometry.height = e.positive()?,
            "mesh.slit_x" => {
                let [a, b] = e.tuple::<2>()?;
                if !(a < b) {
                    return Err(e.range_err("slit interval must satisfy a < b"));
                }
                cfg.geometry.slit_x = (a, b);
            }
            "mesh.slit_y" => cfg.geometry.slit_y = e.float()?,
            "mesh.gap" => cfg.geometry.gap = e.nonnegative()?,
            "mesh.resolution" => cfg.geometry.resolution = e.count()?,
            "contact.tol" => cfg.contact_tol = Some(e.positive()?),
            "contact.gap" => cfg.contact_gap = Some(e.nonnegative()?),
            "material.youngs" => cfg.youngs = e.positive()?,
            "material.poisson" => {
                let nu = e.float()?;
                if !(nu > -1.0 && nu < 0.5) {
                    return Err(e.range_err(format!("must lie in (-1, 0.5), got {nu}")));
                }
                cfg.poisson = nu;
            }
            "material.mode" => cfg.mode = e.value.parse::<PlaneMode>().map_err(|err| e.type_err(err.to_string()))?,
            "law.kind" => {
                cfg.law_kind = match e.value {
                    "zero" => LawKind::Zero,
                    "linear" => LawKind::Linear,
                    "perzyna" => LawKind::Perzyna,
                    other => return Err(e.type_err(format!("expected zero, linear or perzyna, got '{other}'"))),
                };
                law_line = Some(line);
            }
            "law.kappa" => cfg.kappa = e.positive()?,
            "law.sigma_y" => {
                cfg.sigma_y = Some(e.positive()?);
            }
            "load.body" => cfg.body = e.tuple::<2>()?,
            "load.traction" => cfg.traction = e.tuple::<2>()?,
            "load.profile" => cfg.profile = e.value.parse::<TimeProfile>().map_err(|err| e.type_err(err.to_string()))?,
            "init.sigma0" => {
                let [xx, yy, xy] = e.tuple::<3>()?;
                cfg.sigma0 = SymTensor2::new(xx, yy, xy);
            }
            "vi.tol" => cfg.vi.tol = e.positive()?,
            "vi.max_iters" => cfg.vi.max_iters = Some(e.count()?),
            "vi.step" => cfg.vi.step = e.value.parse::<StepSize>().map_err(|err| e.type_err(err.to_string()))?,
            "vi.method" => cfg.vi.method = e.value.parse::<VIMethod>().map_err(|err| e.type_err(err.to_string()))?,
            "time.dt" => cfg.dt = e.positive()?,
            "time.T" => cfg.horizon = e.positive()?,
            "fp.tol" => cfg.fp_tol = e.positive()?,
            "fp.max_iters" => cfg.fp_max_iters = e.count()?,
            "fp.quadrature" => cfg.quadrature = e.value.parse::<Quadrature>().map_err(|err| e.type_err(err.to_string()))?,
            "fp.scheme" => cfg.scheme = e.value.parse::<Scheme>().map_err(|err| e.type_err(err.to_string()))?,
            "out.dir" => cfg.out_dir = PathBuf::from(e.value),
            "out.fields" => {
                let mut fields = Vec::new();
                for name in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let f = OutField::parse(name)
                        .ok_or_else(|| e.type_err(format!("unknown field '{name}' (expected u, sigma, eta, lambda)")))?;
                    if !fields.contains(&f) {
                        fields.push(f);
                    }
                }
                fields.sort();
                cfg.out_fields = fields;
            }
            "seed" => {
                cfg.seed = e
                    .value
                    .parse()
                    .map_err(|_| e.type_err(format!("expected an unsigned integer, got '{}'", e.value)))?
            }
            other => {
                let region = other
                    .strip_prefix("region.")
                    .and_then(|rest| rest.split_once('.'))
                    .and_then(|(id, prop)| id.parse::<u32>().ok().map(|id| (id, prop)));
                match region {
                    Some((id, "youngs")) => region_lines.entry(id).or_insert((None, None, line)).0 = Some(e.positive()?),
                    Some((id, "poisson")) => {
                        let nu = e.float()?;
                        if !(nu > -1.0 && nu < 0.5) {
                            return Err(e.range_err(format!("must lie in (-1, 0.5), got {nu}")));
                        }
                        region_lines.entry(id).or_insert((None, None, line)).1 = Some(nu);
                    }
                    _ => {
                        return Err(ConfigError::UnknownKey {
                            line,
                            key: other.to_string(),
                        })
                    }
                }
            }
        }
    }
    if cfg.law_kind == LawKind::Perzyna && cfg.sigma_y.is_none() {
        return Err(ConfigError::Missing {
            key: "law.sigma_y".into(),
            line: law_line,
        });
    }
    for (id, (youngs, poisson, line)) in region_lines {
        let missing = |k: &str| ConfigError::Missing {
            key: format!("region.{id}.{k}"),
            line: Some(line),
        };
        cfg.regions.insert(
            id,
            RegionMaterial {
                youngs: youngs.ok_or_else(|| missing("youngs"))?,
                poisson: poisson.ok_or_else(|| missing("poisson"))?,
            },
        );
    }
    Ok(cfg)
}

impl RunConfig {
    /// Full effective configuration in the input syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# effective configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(p) = &self.mesh_file {
            kv("mesh.file", p.display().to_string());
        }
        let g = &self.geometry;
        kv("mesh.width", format!("{:?}", g.width));
        kv("mesh.height", format!("{:?}", g.height));
        kv("mesh.slit_x", fmt_tuple(&[g.slit_x.0, g.slit_x.1]));
        kv("mesh.slit_y", format!("{:?}", g.slit_y));
        kv("mesh.gap", format!("{:?}", g.gap));
        kv("mesh.resolution", g.resolution.to_string());
        if let Some(t) = self.contact_tol {
            kv("contact.tol", format!("{t:?}"));
        }
        if let Some(gap) = self.contact_gap {
            kv("contact.gap", format!("{gap:?}"));
        }
        kv("material.youngs", format!("{:?}", self.youngs));
        kv("material.poisson", format!("{:?}", self.poisson));
        kv("material.mode", self.mode.to_string());
        for (id, r) in &self.regions {
            kv(&format!("region.{id}.youngs"), format!("{:?}", r.youngs));
            kv(&format!("region.{id}.poisson"), format!("{:?}", r.poisson));
        }
        kv(
            "law.kind",
            match self.law_kind {
                LawKind::Zero => "zero",
                LawKind::Linear => "linear",
                LawKind::Perzyna => "perzyna",
            }
            .into(),
        );
        kv("law.kappa", format!("{:?}", self.kappa));
        if let Some(s) = self.sigma_y {
            kv("law.sigma_y", format!("{s:?}"));
        }
        kv("load.body", fmt_tuple(&self.body));
        kv("load.traction", fmt_tuple(&self.traction));
        kv("load.profile", self.profile.to_string());
        kv("init.sigma0", fmt_tuple(&[self.sigma0.xx, self.sigma0.yy, self.sigma0.xy]));
        kv("vi.tol", format!("{:?}", self.vi.tol));
        match self.vi.max_iters {
            Some(n) => kv("vi.max_iters", n.to_string()),
            None => kv("# vi.max_iters", "50 * free dofs".into()),
        }
        kv("vi.step", self.vi.step.to_string());
        kv("vi.method", self.vi.method.to_string());
        kv("time.dt", format!("{:?}", self.dt));
        kv("time.T", format!("{:?}", self.horizon));
        kv("fp.tol", format!("{:?}", self.fp_tol));
        kv("fp.max_iters", self.fp_max_iters.to_string());
        kv("fp.quadrature", self.quadrature.to_string());
        kv("fp.scheme", self.scheme.to_string());
        kv("out.dir", self.out_dir.display().to_string());
        let fields: Vec<&str> = self.out_fields.iter().map(|f| f.name()).collect();
        kv("out.fields", fields.join(","));
        kv("seed", self.seed.to_string());
        out
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            vi: self.vi,
            fp_tol: self.fp_tol,
            fp_max_iters: self.fp_max_iters,
            quadrature: self.quadrature,
            scheme: self.scheme,
        }
    }

    pub fn law(&self) -> Result<ViscoplasticLaw, ConfigError> {
        let bad = |e: crate::material::MaterialError| ConfigError::Range {
            line: 0,
            key: "law".into(),
            msg: e.to_string(),
        };
        match self.law_kind {
            LawKind::Zero => Ok(ViscoplasticLaw::Zero),
            LawKind::Linear => ViscoplasticLaw::linear_relaxation(self.kappa).map_err(bad),
            LawKind::Perzyna => {
                let sy = self.sigma_y.ok_or(ConfigError::Missing {
                    key: "law.sigma_y".into(),
                    line: None,
                })?;
                ViscoplasticLaw::truncated_perzyna(self.kappa, sy).map_err(bad)
            }
        }
    }

    pub fn material(&self) -> Result<MaterialField, ConfigError> {
        let build = |e, nu, key: String| {
            isotropic_tensor(e, nu, self.mode).map_err(|err| ConfigError::Range {
                line: 0,
                key,
                msg: err.to_string(),
            })
        };
        let mut field = MaterialField::homogeneous(build(self.youngs, self.poisson, "material".into())?);
        for (&id, r) in &self.regions {
            field = field.with_region(id, build(r.youngs, r.poisson, format!("region.{id}"))?);
        }
        Ok(field)
    }

    /// The mesh named by `mesh.file` (relative to `base`), else the preset.
    pub fn load_mesh(&self, base: &Path) -> Result<(Mesh2D, Vec<String>), ConfigError> {
        match &self.mesh_file {
            Some(p) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                let line = self.mesh_file_line.unwrap_or(0);
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::MissingMesh {
                    line,
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
                let loaded = load_mesh(&text).map_err(|e| ConfigError::Mesh(format!("{}: {e}", path.display())))?;
                Ok((loaded.mesh, loaded.warnings))
            }
            None => build_notched_rectangle(&self.geometry)
                .map(|m| (m, Vec::new()))
                .map_err(|e| ConfigError::Mesh(e.to_string())),
        }
    }

    /// Assembles the problem on `mesh`.
    pub fn build_problem(&self, mesh: Mesh2D) -> Result<Problem, ConfigError> {
        let tol = self.contact_tol.unwrap_or(1e-9 * mesh.diameter());
        let mut constraints = match_contact_pairs(&mesh, tol).map_err(|e| ConfigError::Mesh(e.to_string()))?;
        if let Some(g) = self.contact_gap {
            constraints = constraints
                .with_uniform_gap(g)
                .map_err(|e| ConfigError::Mesh(e.to_string()))?;
        }
        let nt = mesh.n_triangles();
        let spec = ProblemSpec {
            constraints,
            material: self.material()?,
            law: self.law()?,
            loads: LoadSpec {
                body: Load {
                    amplitude: self.body,
                    profile: self.profile,
                },
                traction: Load {
                    amplitude: self.traction,
                    profile: self.profile,
                },
            },
            u0: None,
            sigma0: (self.sigma0 != SymTensor2::ZERO).then(|| vec![self.sigma0; nt]),
            grid: TimeGrid::new(self.horizon, self.dt)?,
            config: self.solver_config(),
            mesh,
        };
        Ok(Problem::new(spec)?)
    }
}
