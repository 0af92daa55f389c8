//! Self-similar spreading profiles `G_alpha` for mass `alpha` in `(0, 8 pi)`,
//! their potentials, radial velocities, and the zero eigenfunction of the
//! linearized dynamics.
//!
//! A profile solves the Euler-Lagrange fixed point
//! `G = alpha e^{c - r^2/4} / Z` with `-Delta c = G` and
//! `Z = ∫ e^{c - r^2/4}`, iterated with damping and per-sweep mass
//! renormalization.  The converged tables satisfy the log-gradient identity
//! `(log G)' = c' - r/2` by construction.

use crate::fields::{
    poisson_radial_parts, Field2D, FieldError, GridSpec, RadialField,
};
use crate::numerics::quad::{radial_mass, trapz};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, RwLock};

/// Largest supported mass; the fixed point slows and the tail flattens as
/// the critical mass is approached, so we refuse to go past `7.9 pi`.
pub const MAX_ALPHA: f64 = 7.9 * PI;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("mass {alpha} out of supported range (0, {max})")]
    OutOfRange { alpha: f64, max: f64 },
    #[error("fixed point did not converge for mass {alpha}: residual {residual:.3e} after {iters} sweeps")]
    NonConvergence {
        alpha: f64,
        residual: f64,
        iters: usize,
    },
    #[error("tail truncation: G(r_max)/G(0) = {ratio:.3e} exceeds 1e-10; enlarge r_max")]
    TailTruncation { ratio: f64 },
    #[error("rescaled profile does not fit the target box")]
    DoesNotFit,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Radial grid and iteration controls for the profile solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub n_points: usize,
    pub r_max: f64,
    /// Damping factor of the fixed-point update.
    pub theta: f64,
    /// Convergence tolerance on `sup |G - alpha e^{c-r^2/4}/Z| / G(0)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            n_points: 4096,
            r_max: 20.0,
            theta: 0.5,
            tol: 1e-12,
            max_iter: 5000,
        }
    }
}

impl ProfileConfig {
    fn key(&self) -> (usize, u64, u64, u64, usize) {
        (
            self.n_points,
            self.r_max.to_bits(),
            self.theta.to_bits(),
            self.tol.to_bits(),
            self.max_iter,
        )
    }
}

/// Converged radial tabulation of a self-similar profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub alpha: f64,
    /// Profile values `G_alpha(r)` (strictly positive, decreasing).
    pub g: RadialField,
    /// Potential `c_alpha(r)` with `-Delta c = G`.
    pub c: RadialField,
    /// Radial velocity `c_alpha'(r)` (non-positive).
    pub v_g: RadialField,
    /// Normalization `∫ e^{c - r^2/4} dxi` over the plane.
    pub z: f64,
    /// Converged fixed-point residual.
    pub residual: f64,
    /// Relative defect of the second-moment identity
    /// `∫ |xi|^2 G = 4 alpha (1 - alpha / 8 pi)`.
    pub virial_error: f64,
}

impl SelfSimilarProfile {
    pub fn nodes(&self) -> &[f64] {
        self.g.nodes()
    }

    /// `∫ |xi|^2 G dxi = 2 pi ∫ r^3 G dr`.
    pub fn second_moment(&self) -> f64 {
        let integrand: Vec<f64> = self
            .g
            .nodes()
            .iter()
            .zip(self.g.values())
            .map(|(&r, &v)| r * r * r * v)
            .collect();
        2.0 * PI * trapz(self.g.nodes(), &integrand)
    }

    /// Peak value `G(0)`.
    pub fn peak(&self) -> f64 {
        self.g.values()[0]
    }

    /// Sample the physical-variable solution `t^{-1} G((x - z)/sqrt(t))` on
    /// a grid, by monotone cubic interpolation of the radial table.
    /// Radius containing all but `frac` of the profile mass.
    pub fn containment_radius(&self, frac: f64) -> f64 {
        let nodes = self.g.nodes();
        let weighted: Vec<f64> = nodes
            .iter()
            .zip(self.g.values())
            .map(|(&r, &v)| r * v)
            .collect();
        let cum = crate::numerics::quad::cumtrapz(nodes, &weighted);
        let total = cum[cum.len() - 1];
        let target = (1.0 - frac) * total;
        for (i, &m) in cum.iter().enumerate() {
            if m >= target {
                return nodes[i];
            }
        }
        *nodes.last().unwrap()
    }

    pub fn sample(
        &self,
        grid: GridSpec,
        t: f64,
        z: [f64; 2],
    ) -> Result<Field2D, ProfileError> {
        let sqrt_t = t.sqrt();
        let support = 0.5 * grid.half_width;
        let reach = sqrt_t * self.containment_radius(1e-9)
            + ((z[0] - grid.center[0]).powi(2) + (z[1] - grid.center[1]).powi(2)).sqrt();
        if reach > 0.95 * grid.half_width
            || (z[0] - grid.center[0]).abs() > support
            || (z[1] - grid.center[1]).abs() > support
        {
            return Err(ProfileError::DoesNotFit);
        }
        let interp = self.g.interp();
        let f = Field2D::from_fn(grid, |x, y| {
            let r = ((x - z[0]).powi(2) + (y - z[1]).powi(2)).sqrt() / sqrt_t;
            interp.eval_decay(r) / t
        })?;
        Ok(f)
    }

    /// Radial velocity `v^G` sampled at radius `r` (zero beyond the table).
    pub fn velocity_interp(&self) -> crate::numerics::interp::MonotoneCubic {
        self.v_g.interp()
    }

    /// Export `r, G, c, vG` columns plus a JSON sidecar with the scalar
    /// diagnostics.  `path` names the CSV file; the sidecar replaces the
    /// extension with `.json`.
    pub fn write_csv(&self, path: &Path) -> Result<(), std::io::Error> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "r,G,c,vG")?;
        for i in 0..self.g.nodes().len() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.g.nodes()[i],
                self.g.values()[i],
                self.c.values()[i],
                self.v_g.values()[i]
            )?;
        }
        w.flush()?;
        let sidecar = path.with_extension("json");
        let header = serde_json::json!({
            "alpha": self.alpha,
            "Z": self.z,
            "residual": self.residual,
            "virial_error": self.virial_error,
        });
        std::fs::write(sidecar, serde_json::to_string_pretty(&header)?)?;
        Ok(())
    }
}

/// Unit-mass Gaussian table `(4 pi)^{-1} e^{-r^2/4}` on the given grid.
pub fn gaussian_profile_table(n_points: usize, r_max: f64) -> RadialField {
    RadialField::from_fn(n_points, r_max, |r| (-r * r / 4.0).exp() / (4.0 * PI))
}

/// Solve for the self-similar profile of mass `alpha`.
pub fn solve_profile(
    alpha: f64,
    config: &ProfileConfig,
) -> Result<SelfSimilarProfile, ProfileError> {
    if !(alpha > 0.0 && alpha < MAX_ALPHA) {
        return Err(ProfileError::OutOfRange {
            alpha,
            max: MAX_ALPHA,
        });
    }
    let n = config.n_points;
    let r_max = config.r_max;
    let mut g = gaussian_profile_table(n, r_max);
    let scale = alpha / g.mass();
    for v in g.values_mut() {
        *v *= scale;
    }
    let nodes: Vec<f64> = g.nodes().to_vec();

    let mut residual = f64::INFINITY;
    let mut converged_at = None;
    for it in 0..config.max_iter {
        let (c, _) = poisson_radial_parts(&g)?;
        let phi: Vec<f64> = nodes
            .iter()
            .zip(c.values())
            .map(|(&r, &cv)| (cv - r * r / 4.0).exp())
            .collect();
        let z = radial_mass(&nodes, &phi);
        let peak = g.values()[0];
        let mut worst = 0.0_f64;
        let theta = config.theta;
        {
            let gv = g.values_mut();
            for i in 0..n {
                let target = alpha * phi[i] / z;
                worst = worst.max((gv[i] - target).abs());
                gv[i] = (1.0 - theta) * gv[i] + theta * target;
            }
        }
        let mass_scale = alpha / g.mass();
        for v in g.values_mut() {
            *v *= mass_scale;
        }
        residual = worst / peak;
        if residual < config.tol {
            converged_at = Some(it + 1);
            break;
        }
    }
    if converged_at.is_none() {
        return Err(ProfileError::NonConvergence {
            alpha,
            residual,
            iters: config.max_iter,
        });
    }
    let tail_ratio = g.values()[n - 1].abs() / g.values()[0];
    if tail_ratio > 1e-10 {
        return Err(ProfileError::TailTruncation { ratio: tail_ratio });
    }

    let (c, dc) = poisson_radial_parts(&g)?;
    let phi: Vec<f64> = nodes
        .iter()
        .zip(c.values())
        .map(|(&r, &cv)| (cv - r * r / 4.0).exp())
        .collect();
    let z = radial_mass(&nodes, &phi);
    let virial_target = 4.0 * alpha * (1.0 - alpha / (8.0 * PI));
    let second_moment = {
        let integrand: Vec<f64> = nodes
            .iter()
            .zip(g.values())
            .map(|(&r, &v)| r * r * r * v)
            .collect();
        2.0 * PI * trapz(&nodes, &integrand)
    };
    Ok(SelfSimilarProfile {
        alpha,
        c,
        v_g: dc,
        g,
        z,
        residual,
        virial_error: (second_moment - virial_target).abs() / virial_target,
    })
}

/// `|| G_alpha - G_beta ||_{L^1}` from two converged solves.
pub fn profile_lipschitz(
    alpha: f64,
    beta: f64,
    cache: &ProfileCache,
) -> Result<f64, ProfileError> {
    let pa = cache.get(alpha)?;
    let pb = cache.get(beta)?;
    let diff: Vec<f64> = pa
        .g
        .values()
        .iter()
        .zip(pb.g.values())
        .map(|(&a, &b)| (a - b).abs())
        .collect();
    Ok(radial_mass(pa.g.nodes(), &diff))
}

/// Zero eigenfunction `E_alpha^0 = d G_lambda / d lambda` at `lambda = alpha`
/// by a centered difference with step `h`.  Its integral over the plane is 1
/// exactly, because each solve carries its exact discrete mass.
pub fn zero_mode(alpha: f64, h: f64, cache: &ProfileCache) -> Result<RadialField, ProfileError> {
    assert!(h > 0.0);
    let hi = cache.get(alpha + h)?;
    let lo = cache.get(alpha - h)?;
    let values: Vec<f64> = hi
        .g
        .values()
        .iter()
        .zip(lo.g.values())
        .map(|(&a, &b)| (a - b) / (2.0 * h))
        .collect();
    Ok(hi.g.with_values(values))
}

/// Concurrent profile cache keyed by `(alpha, grid config)`.
pub struct ProfileCache {
    config: ProfileConfig,
    map: RwLock<HashMap<(u64, (usize, u64, u64, u64, usize)), Arc<SelfSimilarProfile>>>,
}

impl ProfileCache {
    pub fn new(config: ProfileConfig) -> Self {
        ProfileCache {
            config,
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &ProfileConfig {
        &self.config
    }

    /// Fetch or solve the profile of mass `alpha`.
    pub fn get(&self, alpha: f64) -> Result<Arc<SelfSimilarProfile>, ProfileError> {
        let key = (alpha.to_bits(), self.config.key());
        if let Some(p) = self.map.read().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let solved = Arc::new(solve_profile(alpha, &self.config)?);
        let mut w = self.map.write().unwrap();
        Ok(w.entry(key).or_insert(solved).clone())
    }
}

impl Default for ProfileCache {
    fn default() -> Self {
        ProfileCache::new(ProfileConfig::default())
    }
}
