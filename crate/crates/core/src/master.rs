//! The dephasing master equation `rho' = -i[H, rho] - D [H, [H, rho]]`
//! induced by clock noise, with `D = kappa^2 / theta`.
//!
//! Two independent routes are provided: fixed-step RK4 integration of the
//! right-hand side in the working basis, and the closed-form solution
//! `rho_nm(t) = rho_nm(0) e^{-i omega_nm t} e^{-omega_nm^2 D t}` in the
//! energy eigenbasis. Keeping both lets each validate the other.

use num_complex::Complex64;

use crate::quantum::{CMatrix, DensityMatrix, Hamiltonian};
use crate::{Error, Result};

/// Step bound: `dt <= PHASE_RESOLUTION / max |omega_nm|` so the fastest
/// coherence is resolved, and the same fraction of the fastest decay.
pub const PHASE_RESOLUTION: f64 = 0.1;

/// Eigenvalues may undershoot zero by this much along a trajectory before
/// the integrator is considered broken.
pub const TRAJECTORY_POSITIVITY_TOL: f64 = 1e-8;

/// Generator data for the master equation: Hamiltonian, diffusion constant
/// `D = kappa^2/theta`, and the integrator step.
#[derive(Debug, Clone)]
pub struct MasterParams {
    h: Hamiltonian,
    diffusion: f64,
    dt: f64,
}

impl MasterParams {
    pub fn new(h: Hamiltonian, diffusion: f64, dt: f64) -> Result<Self> {
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(Error::parameter("diffusion must be non-negative and finite"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::parameter("dt must be positive and finite"));
        }
        let span = h.max_gap();
        if span > 0.0 {
            let phase_bound = PHASE_RESOLUTION / span;
            if dt > phase_bound {
                return Err(Error::parameter(format!(
                    "dt = {dt} exceeds phase-resolution bound {phase_bound}"
                )));
            }
            let decay = diffusion * span * span;
            if decay > 0.0 && dt > PHASE_RESOLUTION / decay {
                return Err(Error::parameter(format!(
                    "dt = {dt} exceeds decay-resolution bound {}",
                    PHASE_RESOLUTION / decay
                )));
            }
        }
        Ok(Self { h, diffusion, dt })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Clock time beyond which accumulated errors exceed the system's
    /// characteristic time: `zeta^2 / D`. `None` when no finite scale exists
    /// (degenerate spectrum or zero diffusion).
    pub fn applicability_period(&self) -> Option<f64> {
        let zeta = self.h.zeta()?;
        if self.diffusion == 0.0 {
            return None;
        }
        Some(zeta * zeta / self.diffusion)
    }

    fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let comm = self.h.matrix().commutator(rho);
        let double = self.h.matrix().commutator(&comm);
        comm.scale(Complex64::new(0.0, -1.0))
            .sub(&double.scale_re(self.diffusion))
    }

    fn check_dim(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.h.dim() {
            return Err(Error::parameter(format!(
                "dimension mismatch: H is {}, rho is {}",
                self.h.dim(),
                rho.dim()
            )));
        }
        Ok(())
    }
}

/// One RK4 step of size `params.dt()`. The result is re-hermitized to scrub
/// rounding drift; trace is preserved because both generator terms are
/// traceless.
pub fn step_rk4(params: &MasterParams, rho: &DensityMatrix) -> Result<DensityMatrix> {
    params.check_dim(rho)?;
    Ok(step_rk4_dt(params, rho, params.dt()))
}

fn step_rk4_dt(params: &MasterParams, rho: &DensityMatrix, dt: f64) -> DensityMatrix {
    let y = rho.matrix();
    let k1 = params.rhs(y);
    let k2 = params.rhs(&y.add(&k1.scale_re(0.5 * dt)));
    let k3 = params.rhs(&y.add(&k2.scale_re(0.5 * dt)));
    let k4 = params.rhs(&y.add(&k3.scale_re(dt)));

    let mut next = y.add(
        &k1.add(&k2.scale_re(2.0))
            .add(&k3.scale_re(2.0))
            .add(&k4)
            .scale_re(dt / 6.0),
    );
    next.hermitize();
    DensityMatrix::from_trusted(next)
}

/// Closed-form solution at clock time `t`: element-wise damping and phase in
/// the energy eigenbasis.
pub fn solve_exact(params: &MasterParams, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    params.check_dim(rho0)?;
    if !(t >= 0.0) {
        return Err(Error::parameter("t must be non-negative"));
    }
    let h = params.hamiltonian();
    let mut tilde = h.to_eigenbasis(rho0.matrix());
    let n = tilde.dim();
    let omega = h.eigenvalues();
    for r in 0..n {
        for c in 0..n {
            if r == c {
                continue;
            }
            let gap = omega[r] - omega[c];
            let factor =
                Complex64::cis(-gap * t) * (-gap * gap * params.diffusion() * t).exp();
            let scaled = tilde[(r, c)] * factor;
            tilde[(r, c)] = scaled;
        }
    }
    Ok(DensityMatrix::from_trusted(h.from_eigenbasis(&tilde)))
}

/// Decoherence rate of one coherence element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRate {
    pub n: usize,
    pub m: usize,
    /// `omega_nm^2 D`.
    pub rate: f64,
}

/// Decay constants `omega_nm^2 D` for all level pairs `n < m`.
pub fn decay_constants(params: &MasterParams) -> Vec<DecayRate> {
    let omega = params.hamiltonian().eigenvalues();
    let mut rates = Vec::new();
    for n in 0..omega.len() {
        for m in (n + 1)..omega.len() {
            let gap = omega[n] - omega[m];
            rates.push(DecayRate {
                n,
                m,
                rate: gap * gap * params.diffusion(),
            });
        }
    }
    rates
}

/// Smallest nonzero decay constant; the inverse of the applicability period.
pub fn min_nonzero_rate(params: &MasterParams) -> Option<f64> {
    let gap = params.hamiltonian().min_gap()?;
    let rate = gap * gap * params.diffusion();
    (rate > 0.0).then_some(rate)
}

/// One recorded snapshot of an integration run.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub rho: DensityMatrix,
    pub entropy: f64,
    /// Monitored, not enforced: the generator is completely positive, so a
    /// drift below `-TRAJECTORY_POSITIVITY_TOL` means integrator error.
    pub min_eigenvalue: f64,
}

/// A fixed-step RK4 trajectory with recorded snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Set when the requested horizon runs past the clock's applicability
    /// period; the equation stays integrable but the model derivation does
    /// not cover that regime.
    pub exceeds_applicability: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.entropy).collect()
    }
}

/// Integrates from `rho0` to exactly `t_final`, recording every
/// `record_every` steps (the final state is always recorded). The last step
/// is shortened when `t_final` is not a step multiple.
pub fn integrate(
    params: &MasterParams,
    rho0: &DensityMatrix,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    params.check_dim(rho0)?;
    if !(t_final >= 0.0) {
        return Err(Error::parameter("t_final must be non-negative"));
    }
    if record_every == 0 {
        return Err(Error::parameter("record_every must be at least 1"));
    }

    let dt = params.dt();
    let full_steps = ((t_final / dt) * (1.0 + 1e-12)).floor() as usize;
    let remainder = t_final - full_steps as f64 * dt;
    let has_tail = remainder > 1e-12 * dt.max(t_final);

    let mut points = Vec::new();
    let mut rho = rho0.clone();
    points.push(snapshot(0.0, &rho)?);

    for step in 1..=full_steps {
        rho = step_rk4_dt(params, &rho, dt);
        let at_end = step == full_steps && !has_tail;
        if step % record_every == 0 && !at_end {
            points.push(snapshot(step as f64 * dt, &rho)?);
        } else if at_end {
            points.push(snapshot(t_final, &rho)?);
        }
    }
    if has_tail {
        rho = step_rk4_dt(params, &rho, remainder);
        points.push(snapshot(t_final, &rho)?);
    }

    let exceeds = params
        .applicability_period()
        .map(|p| t_final > p)
        .unwrap_or(false);

    Ok(Trajectory {
        points,
        exceeds_applicability: exceeds,
    })
}

fn snapshot(t: f64, rho: &DensityMatrix) -> Result<TrajectoryPoint> {
    let (eigenvalues, _) = crate::quantum::diagonalize(rho.matrix())?;
    let min_eigenvalue = eigenvalues[0];
    if min_eigenvalue < -TRAJECTORY_POSITIVITY_TOL {
        return Err(Error::numerical(format!(
            "state eigenvalue {min_eigenvalue:.3e} below -{TRAJECTORY_POSITIVITY_TOL:.0e} at t = {t}; \
             the integrator step is too coarse"
        )));
    }
    let mut entropy = 0.0;
    for &lambda in &eigenvalues {
        if lambda > 0.0 {
            entropy -= lambda * lambda.ln();
        }
    }
    Ok(TrajectoryPoint {
        t,
        rho: rho.clone(),
        entropy,
        min_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{
        evolve_unitary, random_density, random_unitary, von_neumann_entropy,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn qubit_params(diffusion: f64, dt: f64) -> MasterParams {
        MasterParams::new(Hamiltonian::qubit(1.0).unwrap(), diffusion, dt).unwrap()
    }

    #[test]
    fn diagonal_state_is_a_fixed_point_of_the_step() {
        let params = qubit_params(0.0, 0.01);
        let rho = DensityMatrix::from_probabilities(&[0.7, 0.3]).unwrap();
        let next = step_rk4(&params, &rho).unwrap();
        assert_eq!(next.matrix().max_abs_diff(rho.matrix()), 0.0);
    }

    #[test]
    fn step_preserves_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let h = Hamiltonian::new(crate::quantum::random_hermitian(4, &mut rng)).unwrap();
        let params = MasterParams::new(h, 0.01, 0.01).unwrap();
        let rho = random_density(4, &mut rng);
        let next = step_rk4(&params, &rho).unwrap();
        assert!((next.matrix().trace().re - 1.0).abs() < 1e-13);
        assert!(next.matrix().trace().im.abs() < 1e-13);
    }

    #[test]
    fn single_step_matches_exact_solution_to_fifth_order() {
        let params = qubit_params(0.01, 0.001);
        let rho = DensityMatrix::plus();
        let stepped = step_rk4(&params, &rho).unwrap();
        let exact = solve_exact(&params, &rho, 0.001).unwrap();
        assert!(stepped.matrix().max_abs_diff(exact.matrix()) < 1e-14);
    }

    #[test]
    fn exact_solution_reference_points() {
        let params = qubit_params(0.01, 0.01);
        let rho = DensityMatrix::plus();

        let at_zero = solve_exact(&params, &rho, 0.0).unwrap();
        assert!(at_zero.matrix().max_abs_diff(rho.matrix()) < 1e-15);

        // |rho01(100)| = 0.5 e^{-omega^2 D t} = 0.5/e.
        let at_100 = solve_exact(&params, &rho, 100.0).unwrap();
        let mag = at_100.matrix()[(0, 1)].norm();
        assert!((mag - 0.5 * (-1.0f64).exp()).abs() < 1e-12);

        assert!(solve_exact(&params, &rho, -1.0).is_err());
    }

    #[test]
    fn energy_diagonal_states_are_untouched_by_exact_solution() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let u = random_unitary(3, &mut rng);
        let mut hm = u
            .matmul(&CMatrix::from_diagonal(&[0.0, 0.6, 1.0]))
            .matmul(&u.conjugate_transpose());
        hm.hermitize();
        let h = Hamiltonian::new(hm).unwrap();
        let diag = CMatrix::from_diagonal(&[0.5, 0.25, 0.25]);
        let rho = DensityMatrix::new(h.from_eigenbasis(&diag)).unwrap();
        let params = MasterParams::new(h, 0.02, 0.05).unwrap();
        for t in [0.3, 5.0, 200.0] {
            let out = solve_exact(&params, &rho, t).unwrap();
            assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-13);
        }
    }

    #[test]
    fn decay_constant_table() {
        let params = qubit_params(0.01, 0.01);
        let rates = decay_constants(&params);
        assert_eq!(rates.len(), 1);
        assert!((rates[0].rate - 0.01).abs() < 1e-15);
        assert_eq!(min_nonzero_rate(&params), Some(0.01));

        // Degenerate pair decays at rate zero.
        let h = Hamiltonian::from_diagonal(&[0.5, 0.5, 1.5]).unwrap();
        let params = MasterParams::new(h, 0.01, 0.05).unwrap();
        let rates = decay_constants(&params);
        assert_eq!(rates[0].rate, 0.0);

        // Rates scale with the square of the gap.
        let single = qubit_params(0.01, 0.01);
        let double = MasterParams::new(Hamiltonian::qubit(2.0).unwrap(), 0.01, 0.005).unwrap();
        let r1 = decay_constants(&single)[0].rate;
        let r2 = decay_constants(&double)[0].rate;
        assert!((r2 / r1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn min_rate_is_inverse_applicability_period() {
        let params = qubit_params(0.025, 0.01);
        let rate = min_nonzero_rate(&params).unwrap();
        let period = params.applicability_period().unwrap();
        assert!((rate * period - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_trajectory_is_a_single_snapshot() {
        let params = qubit_params(0.01, 0.01);
        let rho = DensityMatrix::plus();
        let traj = integrate(&params, &rho, 0.0, 10).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(traj.points[0].t, 0.0);
        let s0 = von_neumann_entropy(&rho).unwrap();
        assert!((traj.points[0].entropy - s0).abs() < 1e-12);
    }

    #[test]
    fn final_snapshot_lands_exactly_on_t_final() {
        let params = qubit_params(0.01, 0.01);
        let rho = DensityMatrix::plus();
        let traj = integrate(&params, &rho, 0.505, 7).unwrap();
        let last = traj.points.last().unwrap();
        assert_eq!(last.t, 0.505);
        let exact = solve_exact(&params, &rho, 0.505).unwrap();
        assert!(last.rho.matrix().max_abs_diff(exact.matrix()) < 1e-10);
    }

    #[test]
    fn integrator_agrees_with_exact_solution_on_random_instance() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let u = random_unitary(4, &mut rng);
        let mut hm = u
            .matmul(&CMatrix::from_diagonal(&[0.0, 0.35, 0.65, 1.0]))
            .matmul(&u.conjugate_transpose());
        hm.hermitize();
        let h = Hamiltonian::new(hm).unwrap();
        let span = h.max_gap();
        let diffusion = 0.1 / (span * span);
        let dt = 0.02;
        let params = MasterParams::new(h, diffusion, dt).unwrap();
        let rho = random_density(4, &mut rng);

        let min_rate = min_nonzero_rate(&params).unwrap();
        let t_final = 5.0 / min_rate;
        let record = ((t_final / dt) / 100.0).ceil() as usize;
        let traj = integrate(&params, &rho, t_final, record).unwrap();

        let mut worst = 0.0f64;
        for p in &traj.points {
            let exact = solve_exact(&params, &rho, p.t).unwrap();
            worst = worst.max(p.rho.matrix().max_abs_diff(exact.matrix()));
            assert!((p.rho.matrix().trace().re - 1.0).abs() < 1e-10);
            assert!(p.rho.matrix().hermiticity_error() < 1e-12);
            assert!(p.min_eigenvalue >= -TRAJECTORY_POSITIVITY_TOL);
        }
        assert!(worst < 1e-8, "integrator vs exact deviation {worst}");

        // Entropy never decreases (within rounding slack).
        let entropies = traj.entropies();
        for w in entropies.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "entropy dropped: {} -> {}", w[0], w[1]);
        }

        // Populations in the eigenbasis are constants of motion.
        let h = params.hamiltonian();
        let initial = h.to_eigenbasis(rho.matrix());
        let final_t = h.to_eigenbasis(traj.points.last().unwrap().rho.matrix());
        for n in 0..4 {
            assert!((initial[(n, n)].re - final_t[(n, n)].re).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_diffusion_reduces_to_unitary_motion() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let h = Hamiltonian::new(crate::quantum::random_hermitian(3, &mut rng)).unwrap();
        let rho = random_density(3, &mut rng);
        let params = MasterParams::new(h.clone(), 0.0, 0.01).unwrap();
        let traj = integrate(&params, &rho, 3.0, 50).unwrap();
        for p in &traj.points {
            let unitary = evolve_unitary(&h, &rho, p.t).unwrap();
            assert!(p.rho.matrix().max_abs_diff(unitary.matrix()) < 1e-8);
        }
    }

    #[test]
    fn pointer_states_stay_fixed_along_integration() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let u = random_unitary(3, &mut rng);
        let mut hm = u
            .matmul(&CMatrix::from_diagonal(&[0.0, 0.5, 1.0]))
            .matmul(&u.conjugate_transpose());
        hm.hermitize();
        let h = Hamiltonian::new(hm).unwrap();
        let rho = DensityMatrix::new(
            h.from_eigenbasis(&CMatrix::from_diagonal(&[0.2, 0.5, 0.3])),
        )
        .unwrap();
        let params = MasterParams::new(h, 0.05, 0.05).unwrap();
        let traj = integrate(&params, &rho, 20.0, 20).unwrap();
        for p in &traj.points {
            assert!(p.rho.matrix().max_abs_diff(rho.matrix()) < 1e-10);
        }
    }

    #[test]
    fn step_bounds_are_enforced() {
        let h = Hamiltonian::qubit(1.0).unwrap();
        // Phase bound: dt <= 0.1.
        assert!(MasterParams::new(h.clone(), 0.01, 0.2).is_err());
        // Decay bound: D span^2 = 10 -> dt <= 0.01.
        assert!(MasterParams::new(h.clone(), 10.0, 0.02).is_err());
        assert!(MasterParams::new(h.clone(), -0.1, 0.01).is_err());
        assert!(MasterParams::new(h, 0.01, 0.0).is_err());
    }

    #[test]
    fn applicability_flag_set_beyond_period() {
        let params = qubit_params(0.01, 0.01);
        let rho = DensityMatrix::plus();
        // Period = zeta^2 / D = 100.
        let short = integrate(&params, &rho, 5.0, 100).unwrap();
        assert!(!short.exceeds_applicability);
        let long = integrate(&params, &rho, 150.0, 1000).unwrap();
        assert!(long.exceeds_applicability);
    }
}
