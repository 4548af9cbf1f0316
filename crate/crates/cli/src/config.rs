//! One JSON document drives every command. The accepted shape is published
//! as a JSON schema (`ymlab schema`), deserialization is strict (unknown
//! fields are rejected), and rejections carry the path of the offending
//! field. Sections are optional; each command reads the ones it needs and
//! falls back to library defaults for absent knobs.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use ymlab_core::fields::{Center, Grid};
use ymlab_core::functionals::EntropyConfig;
use ymlab_core::solve::{JacobianMode, SolverConfig};
use ymlab_core::spectral::SpectralConfig;
use ymlab_core::verify::ObstructionConfig;
use ymlab_core::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    /// so(r) rank of the gauge algebra; defaults to the grid dimension.
    #[serde(default)]
    pub rank: Option<usize>,
    /// Gaussian center (x0, t0); defaults to the origin at unit scale.
    #[serde(default)]
    pub center: Option<CenterSection>,
    /// Seed for anything randomized; the --seed flag overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Connection archive manifest to load as the working field. Its grid
    /// and rank must agree with the sections above.
    #[serde(default)]
    pub input: Option<String>,
    /// Construction recipe used when no input archive is given.
    #[serde(default)]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default)]
    pub flow: Option<FlowSection>,
    #[serde(default)]
    pub entropy: Option<EntropySection>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub rescale: Option<RescaleSection>,
    #[serde(default)]
    pub descent: Option<DescentSection>,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.m, self.grid.half_width)
    }

    pub fn rank(&self) -> Result<usize> {
        let r = self.rank.unwrap_or(self.grid.n);
        if r < 2 {
            return Err(Error::InvalidArgument { reason: format!("rank {r} below 2") });
        }
        Ok(r)
    }

    pub fn center(&self, grid: &Grid) -> Result<Center> {
        let c = match &self.center {
            Some(s) => Center::new(s.x0.clone(), s.t0)?,
            None => Center::origin(grid.n(), 1.0),
        };
        c.validate_for(grid)?;
        Ok(c)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Spatial dimension, 2 through 6.
    pub n: usize,
    /// Points per axis; odd so the origin is a grid point.
    pub m: usize,
    /// Box half-width R; the grid covers [-R, R]^n.
    pub half_width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CenterSection {
    pub x0: Vec<f64>,
    pub t0: f64,
}

impl CenterSection {
    pub fn build(&self, grid: &Grid) -> Result<Center> {
        let c = Center::new(self.x0.clone(), self.t0)?;
        c.validate_for(grid)?;
        Ok(c)
    }
}

fn default_window_power() -> i32 {
    3
}

/// Catalog of constructible fields.
#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    /// The zero connection.
    Flat,
    /// Gauge transform of the zero connection: flat up to discretization.
    PureGauge {
        /// Algebra generator indices (p, q) of the rotation plane.
        pair: [usize; 2],
        /// Rotation angle at the box center.
        amplitude: f64,
        /// Exponent of the polynomial window confining the angle profile.
        #[serde(default = "default_window_power")]
        power: i32,
    },
    /// A_j = -(1/2) B_jk x_k E for one algebra generator E: constant
    /// curvature F = B E.
    AbelianLinear {
        /// Grid axes (i, j) carrying the only nonzero entry of B.
        axes: [usize; 2],
        /// Value of B_ij.
        strength: f64,
        /// Algebra generator indices; defaults to (0, 1).
        #[serde(default)]
        generator: Option<[usize; 2]>,
    },
    /// Sum of randomly placed smooth bumps under a decaying envelope,
    /// deterministic in the seed.
    RandomSmooth {
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        length_scale: Option<f64>,
        #[serde(default)]
        envelope_radius: Option<f64>,
        #[serde(default)]
        bumps: Option<usize>,
        /// Use the compactly supported envelope instead of the Gaussian one.
        #[serde(default)]
        compact: bool,
    },
    /// Rotationally equivariant field A_i = f(|x|^2) M_i; needs rank >= n.
    Rotational { profile: RotationalProfile },
    /// Field built in dimension n-1 and extended constantly along one axis.
    DescendedExtension { axis: usize, inner: Box<FieldSpec> },
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RotationalProfile {
    /// f(rho) = amplitude * exp(-rho / scale).
    Gaussian { amplitude: f64, scale: f64 },
    /// The shrinker profile from the radial shooting solve; only exists for
    /// n = 5 and 6 at this box scale, and reports non-convergence otherwise.
    Shrinker,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    FiniteDifference,
    Richardson,
    Symmetrized,
}

impl From<ModeName> for JacobianMode {
    fn from(v: ModeName) -> Self {
        match v {
            ModeName::FiniteDifference => JacobianMode::FiniteDifference,
            ModeName::Richardson => JacobianMode::Richardson,
            ModeName::Symmetrized => JacobianMode::Symmetrized,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub max_outer: Option<usize>,
    #[serde(default)]
    pub cg_tol: Option<f64>,
    #[serde(default)]
    pub cg_max_iters: Option<usize>,
    #[serde(default)]
    pub fd_probe: Option<f64>,
    /// Absolute residual norm ending the solve.
    #[serde(default)]
    pub target_residual: Option<f64>,
    /// Alternative relative target: this times the seed's weighted curvature
    /// norm. The larger of the two targets wins when both are given.
    #[serde(default)]
    pub target_rel: Option<f64>,
    #[serde(default)]
    pub mode: Option<ModeName>,
}

impl SolverSection {
    pub fn build(&self, center: Center, seed_f_norm: f64) -> SolverConfig {
        let mut cfg = SolverConfig::canonical(center.x0.len());
        cfg.center = center;
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.cg_tol {
            cfg.cg_tol = v;
        }
        if let Some(v) = self.cg_max_iters {
            cfg.cg_max_iters = v;
        }
        if let Some(v) = self.fd_probe {
            cfg.fd_probe = v;
        }
        if let Some(v) = self.target_residual {
            cfg.target_residual = v;
        }
        if let Some(rel) = self.target_rel {
            cfg.target_residual = cfg.target_residual.max(rel * seed_f_norm);
        }
        if let Some(m) = self.mode.clone() {
            cfg.mode = m.into();
        }
        cfg
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// Number of low eigenvalues; defaults to n + 4.
    #[serde(default)]
    pub count: Option<usize>,
    /// Project out the known eigenfields J and i_{e_k}F first.
    #[serde(default)]
    pub deflate: bool,
    /// Also run the full stability verdict (a second deflated solve).
    #[serde(default)]
    pub verdict: bool,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_cycles: Option<usize>,
    /// Near-soliton gate relative to the weighted curvature norm.
    #[serde(default)]
    pub gate_rel: Option<f64>,
}

impl SpectrumSection {
    pub fn build(&self, seed: u64) -> SpectralConfig {
        let mut cfg = SpectralConfig::default();
        cfg.seed = seed;
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_cycles {
            cfg.max_cycles = v;
        }
        if let Some(v) = self.gate_rel {
            cfg.gate_rel = v;
        }
        cfg
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    /// Integration horizon.
    pub t_end: f64,
    #[serde(default)]
    pub cfl: Option<f64>,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub sup_f_limit: Option<f64>,
    /// Evaluate the entropy every this many snapshots.
    #[serde(default)]
    pub entropy_every: Option<usize>,
    /// Centers tracked by the shrinking-center diagnostic.
    #[serde(default)]
    pub centers: Vec<CenterSection>,
    /// Compare measured dPhi/dt against the dissipation integral at the
    /// first tracked center.
    #[serde(default)]
    pub monotonicity: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EntropySection {
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub shell_threshold: Option<f64>,
    #[serde(default)]
    pub offset_frac: Option<f64>,
}

impl EntropySection {
    pub fn build(&self) -> EntropyConfig {
        let mut cfg = EntropyConfig::default();
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.grad_tol {
            cfg.grad_tol = v;
        }
        if let Some(v) = self.shell_threshold {
            cfg.shell_threshold = v;
        }
        if let Some(v) = self.offset_frac {
            cfg.offset_frac = v;
        }
        cfg
    }
}

fn default_true() -> bool {
    true
}

fn default_path_samples() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Integration-by-parts identity over the vector-field catalog; holds
    /// for arbitrary smooth fields.
    #[serde(default = "default_true")]
    pub generalized: bool,
    /// Pointwise curvature-gap comparison against the flatness threshold.
    #[serde(default = "default_true")]
    pub gap: bool,
    /// Soliton-gated moment identities (a) through (e).
    #[serde(default)]
    pub soliton_identities: bool,
    /// Direction V entering the catalog and identities (d), (e); defaults
    /// to the first coordinate axis.
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
    /// Near-soliton gate relative to the weighted curvature norm.
    #[serde(default)]
    pub gate_rel: Option<f64>,
    /// sup |F|^2 below which a gated field must be flat.
    #[serde(default)]
    pub flatness_tol: Option<f64>,
    /// Center-rescaling path monotonicity (soliton-gated).
    #[serde(default)]
    pub path: Option<PathSection>,
    /// Multi-dimension solver sweep checking that low dimensions only admit
    /// flat solitons. Each run is a full solve; budget accordingly.
    #[serde(default)]
    pub obstruction: Option<ObstructionSection>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            generalized: true,
            gap: true,
            soliton_identities: false,
            vector: None,
            gate_rel: None,
            flatness_tol: None,
            path: None,
            obstruction: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    /// Spatial endpoint of the center path.
    pub y: Vec<f64>,
    /// Scale endpoint T.
    pub t_cap: f64,
    #[serde(default = "default_path_samples")]
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ObstructionSection {
    /// Dimensions to sweep; entries at most 4 count toward the verdict.
    pub dims: Vec<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub seeds_per_dim: Option<usize>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub mass_tolerance: Option<f64>,
    #[serde(default)]
    pub target_rel: Option<f64>,
    #[serde(default)]
    pub max_outer: Option<usize>,
    #[serde(default)]
    pub cg_max_iters: Option<usize>,
    #[serde(default)]
    pub mode: Option<ModeName>,
}

impl ObstructionSection {
    pub fn build(&self) -> ObstructionConfig {
        let mut cfg = ObstructionConfig::default();
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.half_width {
            cfg.half_width = v;
        }
        if let Some(v) = self.rank {
            cfg.rank = v;
        }
        if let Some(v) = self.seeds_per_dim {
            cfg.seeds_per_dim = v;
        }
        if let Some(v) = self.base_seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.amplitude {
            cfg.amplitude = v;
        }
        if let Some(v) = self.mass_tolerance {
            cfg.mass_tolerance = v;
        }
        if let Some(v) = self.target_rel {
            cfg.target_rel = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.cg_max_iters {
            cfg.cg_max_iters = v;
        }
        if let Some(m) = self.mode.clone() {
            cfg.mode = m.into();
        }
        cfg
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RescaleSection {
    /// Parabolic rescaling factor lambda; the output is lambda A(x0 +
    /// lambda (x - x0)) interpolated back onto the same grid.
    pub lambda: f64,
    /// Fixed point of the rescaling; defaults to the origin.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DescentSection {
    /// Relative eigenvalue threshold selecting decrease directions.
    #[serde(default)]
    pub tol: Option<f64>,
}

/// The published schema for [`RunConfig`], pretty-printed with a trailing
/// newline. A unit test keeps the committed copy in sync.
pub fn schema_string() -> String {
    let schema = schemars::schema_for!(RunConfig);
    let mut s = serde_json::to_string_pretty(&schema).expect("schema serializes");
    s.push('\n');
    s
}
