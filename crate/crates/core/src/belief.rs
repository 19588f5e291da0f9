//! Gaussian target beliefs under a constant-velocity motion model.
//!
//! State layout is `[x, y, vx, vy]` (metres, metres per second). The
//! position block `cov[0..2, 0..2]` is what every downstream consumer
//! (spiral geometry, coverage estimator, uncertainty metric) looks at.
//!
//! Multi-step prediction is evaluated in closed form. Because
//! `F^j = [[I, jτI], [0, I]]`, the accumulated process noise
//! `Σ_{j<k} F^j Q F^jᵀ` reduces to sums of `j` and `j²`, so propagating a
//! belief over a whole coverage sub-task costs the same as one step.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant-velocity motion model `x_k = F x_{k-1} + w`, `w ~ N(0, Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    tau: f64,
    q: f64,
    transition: Matrix4<f64>,
    process_noise: Matrix4<f64>,
}

impl MotionModel {
    /// Builds `F = [[I, τI], [0, I]]` and `Q = q·[[τ³/3 I, τ²/2 I], [τ²/2 I, I]]`.
    pub fn constant_velocity(tau: f64, q: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {tau}")));
        }
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::Domain(format!("process noise intensity must be >= 0, got {q}")));
        }
        let mut process_noise = Matrix4::zeros();
        for i in 0..2 {
            process_noise[(i, i)] = q * tau.powi(3) / 3.0;
            process_noise[(i, i + 2)] = q * tau * tau / 2.0;
            process_noise[(i + 2, i)] = q * tau * tau / 2.0;
            process_noise[(i + 2, i + 2)] = q;
        }
        Ok(Self { tau, q, transition: cv_transition(tau, 1), process_noise })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn transition(&self) -> &Matrix4<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &Matrix4<f64> {
        &self.process_noise
    }

    /// Process noise accumulated over `steps` transitions:
    /// `Σ_{j=0}^{steps-1} F^j Q F^jᵀ`.
    pub fn accumulated_noise(&self, steps: u64) -> Matrix4<f64> {
        let k = steps as f64;
        let s1 = k * (k - 1.0) / 2.0;
        let s2 = (k - 1.0) * k * (2.0 * k - 1.0) / 6.0;
        let tau = self.tau;
        let q = &self.process_noise;
        let qpp = q.fixed_view::<2, 2>(0, 0).into_owned();
        let qpv = q.fixed_view::<2, 2>(0, 2).into_owned();
        let qvv = q.fixed_view::<2, 2>(2, 2).into_owned();

        let pp = qpp * k + (qpv + qpv.transpose()) * (tau * s1) + qvv * (tau * tau * s2);
        let pv = qpv * k + qvv * (tau * s1);
        let vv = qvv * k;

        let mut out = Matrix4::zeros();
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(&pp);
        out.fixed_view_mut::<2, 2>(0, 2).copy_from(&pv);
        out.fixed_view_mut::<2, 2>(2, 0).copy_from(&pv.transpose());
        out.fixed_view_mut::<2, 2>(2, 2).copy_from(&vv);
        out
    }

    /// Whole number of steps closest to `seconds`.
    pub fn steps_for(&self, seconds: f64) -> u64 {
        (seconds / self.tau).round().max(0.0) as u64
    }
}

fn cv_transition(tau: f64, steps: u64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    let dt = tau * steps as f64;
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Position-only measurement model `z = H x + v`, `v ~ N(0, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    noise: Matrix2<f64>,
}

impl ObservationModel {
    pub fn new(noise: Matrix2<f64>) -> Result<Self> {
        let sym = (noise - noise.transpose()).abs().max();
        if sym > 1e-12 * noise.abs().max().max(1.0) {
            return Err(Error::InvalidConfig("observation covariance is not symmetric".into()));
        }
        if !(noise[(0, 0)] > 0.0 && noise.determinant() > 0.0) {
            return Err(Error::InvalidConfig("observation covariance is not positive definite".into()));
        }
        Ok(Self { noise })
    }

    pub fn isotropic(variance: f64) -> Result<Self> {
        Self::new(Matrix2::identity() * variance)
    }

    pub fn noise(&self) -> &Matrix2<f64> {
        &self.noise
    }

    pub fn selection(&self) -> Matrix2x4<f64> {
        Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    }
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self { noise: Matrix2::identity() }
    }
}

/// Gaussian estimate of one target's state at `time` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetBelief {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
    pub time: f64,
}

impl TargetBelief {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>, time: f64) -> Self {
        Self { mean, cov: symmetrize(&cov), time }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.mean[2], self.mean[3])
    }

    /// The 2×2 position block `Σ^{xy}`.
    pub fn position_cov(&self) -> Matrix2<f64> {
        self.cov.fixed_view::<2, 2>(0, 0).into_owned()
    }

    /// Natural-log determinant of the position block.
    pub fn log_det_xy(&self) -> Result<f64> {
        log_det_2x2(&self.position_cov())
    }

    /// Position block after `steps` more predictions, without forming the
    /// full propagated covariance.
    pub fn position_cov_after(&self, model: &MotionModel, steps: u64) -> Matrix2<f64> {
        let dt = model.tau * steps as f64;
        let pp = self.cov.fixed_view::<2, 2>(0, 0);
        let pv = self.cov.fixed_view::<2, 2>(0, 2);
        let vv = self.cov.fixed_view::<2, 2>(2, 2);
        let k = steps as f64;
        let s1 = k * (k - 1.0) / 2.0;
        let s2 = (k - 1.0) * k * (2.0 * k - 1.0) / 6.0;
        let q = &model.process_noise;
        let qpp = q.fixed_view::<2, 2>(0, 0);
        let qpv = q.fixed_view::<2, 2>(0, 2);
        let qvv = q.fixed_view::<2, 2>(2, 2);
        let tau = model.tau;
        let m = pp
            + (pv + pv.transpose()) * dt
            + vv * (dt * dt)
            + qpp * k
            + (qpv + qpv.transpose()) * (tau * s1)
            + qvv * (tau * tau * s2);
        (m + m.transpose()) * 0.5
    }
}

pub(crate) fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

pub fn log_det_2x2(m: &Matrix2<f64>) -> Result<f64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det > 0.0 && m[(0, 0)] > 0.0) {
        return Err(Error::DegenerateEllipse { det });
    }
    Ok(det.ln())
}

/// Propagates a belief `steps` time steps ahead with the motion model.
///
/// Equivalent to iterating `cov ← F cov Fᵀ + Q` `steps` times; `steps = 0`
/// returns the belief unchanged.
pub fn predict(belief: &TargetBelief, model: &MotionModel, steps: u64) -> TargetBelief {
    if steps == 0 {
        return *belief;
    }
    let f = cv_transition(model.tau, steps);
    let mean = f * belief.mean;
    let cov = f * belief.cov * f.transpose() + model.accumulated_noise(steps);
    TargetBelief { mean, cov: symmetrize(&cov), time: belief.time + model.tau * steps as f64 }
}

/// Linear-Gaussian measurement update with a position observation `z`.
///
/// The covariance uses the Joseph form so the posterior stays PSD.
pub fn update(belief: &TargetBelief, z: &Vector2<f64>, obs: &ObservationModel) -> Result<TargetBelief> {
    let h = obs.selection();
    let p = &belief.cov;
    let innovation_cov = h * p * h.transpose() + obs.noise;
    let s_inv = innovation_cov.try_inverse().ok_or(Error::SingularInnovation)?;
    let gain = p * h.transpose() * s_inv;
    let innovation = z - h * belief.mean;
    let mean = belief.mean + gain * innovation;
    let i_kh = Matrix4::identity() - gain * h;
    let cov = i_kh * p * i_kh.transpose() + gain * obs.noise * gain.transpose();
    Ok(TargetBelief { mean, cov: symmetrize(&cov), time: belief.time })
}

/// `U = Σ_i ln det Σ^{xy}_i` with every belief first propagated to
/// `horizon_time` under its own motion model.
pub fn uncertainty_metric(beliefs: &[TargetBelief], models: &[MotionModel], horizon_time: f64) -> Result<f64> {
    if beliefs.len() != models.len() {
        return Err(Error::Domain(format!("{} beliefs but {} motion models", beliefs.len(), models.len())));
    }
    let mut total = 0.0;
    for (belief, model) in beliefs.iter().zip(models) {
        let lag = horizon_time - belief.time;
        if lag < -1e-9 * horizon_time.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "belief at t = {} is already past the horizon {horizon_time}",
                belief.time
            )));
        }
        let steps = model.steps_for(lag.max(0.0));
        total += log_det_2x2(&belief.position_cov_after(model, steps))?;
    }
    Ok(total)
}
