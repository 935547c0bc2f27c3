//! Newton infrastructure shared by all formulations: finite-difference
//! Jacobians (optionally exploiting a registered sparsity pattern) and a dense
//! Newton solve with optional backtracking.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug)]
pub struct NewtonConfig {
    /// Infinity-norm target on the raw residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for Jacobian columns; the actual step
    /// is `fd_eps * max(1, |x_j|)`.
    pub fd_eps: f64,
    /// Backtracking factor applied while a full step increases the residual
    /// norm; `None` always takes full steps.
    pub damping: Option<f64>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iter: 30,
            fd_eps: f64::EPSILON.sqrt(),
            damping: Some(0.5),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct StepReport {
    pub iterations: usize,
    pub residual_norm: f64,
    /// 1-norm condition estimate of the last factorized Jacobian, when one
    /// was computed.
    pub condition_estimate: Option<f64>,
    pub dt: f64,
    /// Residual norms per iteration, starting with the initial residual.
    pub history: Vec<f64>,
}

/// Column groups for grouped finite differencing: columns within one group
/// must not share any residual row, so one perturbed evaluation serves the
/// whole group.
#[derive(Clone, Debug)]
pub struct SparsityPattern {
    /// rows_of[j] = residual rows with a structurally nonzero entry in col j.
    pub rows_of: Vec<Vec<usize>>,
    pub groups: Vec<Vec<usize>>,
}

impl SparsityPattern {
    /// Greedy grouping of columns with pairwise-disjoint row supports.
    pub fn from_rows(rows_of: Vec<Vec<usize>>, nrows: usize) -> Self {
        let ncols = rows_of.len();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_rows: Vec<Vec<bool>> = Vec::new();
        for j in 0..ncols {
            let mut placed = false;
            for (g, used) in group_rows.iter_mut().enumerate() {
                if rows_of[j].iter().all(|&r| !used[r]) {
                    for &r in &rows_of[j] {
                        used[r] = true;
                    }
                    groups[g].push(j);
                    placed = true;
                    break;
                }
            }
            if !placed {
                let mut used = vec![false; nrows];
                for &r in &rows_of[j] {
                    used[r] = true;
                }
                group_rows.push(used);
                groups.push(vec![j]);
            }
        }
        SparsityPattern { rows_of, groups }
    }
}

fn col_step(fd_eps: f64, xj: f64) -> f64 {
    fd_eps * xj.abs().max(1.0)
}

/// Dense forward-difference Jacobian, one residual evaluation per column
/// (columns evaluated in parallel under the `parallel` feature).
pub fn fd_jacobian<F>(residual: &F, x: &DVector<f64>, fd_eps: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    let f0 = residual(x);
    check_finite(&f0)?;
    let (m, n) = (f0.len(), x.len());
    let cols = par::par_map_indices(n, |j| {
        let mut xp = x.clone();
        let dx = col_step(fd_eps, x[j]);
        xp[j] += dx;
        (residual(&xp) - &f0) / dx
    });
    let mut jac = DMatrix::zeros(m, n);
    for (j, col) in cols.iter().enumerate() {
        jac.set_column(j, col);
    }
    for (j, col) in cols.iter().enumerate() {
        if !col.iter().all(|v| v.is_finite()) {
            let rows = col
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_finite())
                .map(|(r, _)| r)
                .collect();
            let _ = j;
            return Err(Error::NonFiniteResidual { rows });
        }
    }
    Ok(jac)
}

/// Grouped forward-difference Jacobian: all columns of a group are perturbed
/// in one evaluation and the entries scattered back through the registered
/// pattern.
pub fn fd_jacobian_grouped<F>(
    residual: &F,
    x: &DVector<f64>,
    fd_eps: f64,
    pattern: &SparsityPattern,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    let f0 = residual(x);
    check_finite(&f0)?;
    let (m, n) = (f0.len(), x.len());
    let per_group = par::par_map(&pattern.groups, |group| {
        let mut xp = x.clone();
        let mut steps = Vec::with_capacity(group.len());
        for &j in group {
            let dx = col_step(fd_eps, x[j]);
            xp[j] += dx;
            steps.push(dx);
        }
        (residual(&xp) - &f0, steps)
    });
    let mut jac = DMatrix::zeros(m, n);
    for (group, (df, steps)) in pattern.groups.iter().zip(per_group) {
        for (&j, &dx) in group.iter().zip(&steps) {
            for &r in &pattern.rows_of[j] {
                jac[(r, j)] = df[r] / dx;
            }
        }
    }
    Ok(jac)
}

fn check_finite(r: &DVector<f64>) -> Result<()> {
    if r.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let rows = r
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(i, _)| i)
        .collect();
    Err(Error::NonFiniteResidual { rows })
}

/// Rough 1-norm condition estimate from an LU factorization: `||A||_1 *
/// ||A^-1 e||_1 / ||e||_1` with a few probe vectors.
pub fn condition_estimate(a: &DMatrix<f64>, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let n = a.ncols();
    let norm_a = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut best: f64 = 0.0;
    for probe in 0..3 {
        let e = DVector::from_fn(n, |i, _| {
            if probe == 0 {
                1.0
            } else if probe == 1 {
                if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            } else if i == n / 2 {
                1.0
            } else {
                0.0
            }
        });
        if let Some(sol) = lu.solve(&e) {
            let num = sol.iter().map(|v| v.abs()).sum::<f64>();
            let den = e.iter().map(|v| v.abs()).sum::<f64>();
            best = best.max(num / den);
        }
    }
    norm_a * best
}

/// Full Newton iteration with a fresh finite-difference Jacobian per step.
pub fn newton_solve<F>(
    residual: F,
    x0: &DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<(DVector<f64>, StepReport)>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    let mut x = x0.clone();
    let mut r = residual(&x);
    check_finite(&r)?;
    let mut norm = r.amax();
    let mut history = vec![norm];
    let mut cond = None;

    for it in 0..cfg.max_iter {
        if norm <= cfg.tol {
            return Ok((
                x,
                StepReport {
                    iterations: it,
                    residual_norm: norm,
                    condition_estimate: cond,
                    dt: 0.0,
                    history,
                },
            ));
        }
        let jac = fd_jacobian(&residual, &x, cfg.fd_eps)?;
        let lu = jac.clone().lu();
        let delta = lu.solve(&r).ok_or(Error::SingularJacobian)?;
        cond = Some(condition_estimate(&jac, &lu));

        match cfg.damping {
            None => {
                x -= &delta;
                r = residual(&x);
                norm = r.amax();
            }
            Some(beta) => {
                // backtrack while the step does not reduce the residual; if
                // nothing on the ray helps, take the least-bad candidate
                let mut scale = 1.0;
                let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
                loop {
                    let cand = &x - scale * &delta;
                    let rc = residual(&cand);
                    let nc = rc.amax();
                    if nc.is_finite() && nc < norm {
                        best = Some((nc, cand, rc));
                        break;
                    }
                    if nc.is_finite() && best.as_ref().map_or(true, |(b, _, _)| nc < *b) {
                        best = Some((nc, cand, rc));
                    }
                    scale *= beta;
                    if scale < 1e-4 {
                        break;
                    }
                }
                let (nc, cand, rc) = best.ok_or(Error::NonFiniteResidual { rows: vec![] })?;
                x = cand;
                r = rc;
                norm = nc;
            }
        }
        check_finite(&r)?;
        history.push(norm);
        // three consecutive non-improving iterations: give up early
        if history.len() >= 4 {
            let k = history.len();
            if history[k - 1] >= history[k - 2] * 0.999
                && history[k - 2] >= history[k - 3] * 0.999
                && history[k - 3] >= history[k - 4] * 0.999
            {
                break;
            }
        }
    }

    if norm <= cfg.tol {
        return Ok((
            x,
            StepReport {
                iterations: cfg.max_iter,
                residual_norm: norm,
                condition_estimate: cond,
                dt: 0.0,
                history,
            },
        ));
    }
    Err(Error::NewtonNoConvergence {
        iterations: cfg.max_iter,
        residual_norm: norm,
        history,
    })
}

/// Reusable LU factorization for chord (frozen-Jacobian) Newton stepping.
pub struct JacobianCache {
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    pub cond: Option<f64>,
    pub factorizations: usize,
    pub steps_since_refresh: usize,
}

impl JacobianCache {
    pub fn new() -> Self {
        JacobianCache {
            lu: None,
            cond: None,
            factorizations: 0,
            steps_since_refresh: 0,
        }
    }

    pub fn invalidate(&mut self) {
        self.lu = None;
    }

    fn refresh<F>(
        &mut self,
        residual: &F,
        x: &DVector<f64>,
        cfg: &NewtonConfig,
        pattern: Option<&SparsityPattern>,
        estimate_cond: bool,
    ) -> Result<()>
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
    {
        let jac = match pattern {
            Some(p) => fd_jacobian_grouped(residual, x, cfg.fd_eps, p)?,
            None => fd_jacobian(residual, x, cfg.fd_eps)?,
        };
        let lu = jac.clone().lu();
        if estimate_cond {
            self.cond = Some(condition_estimate(&jac, &lu));
        }
        self.lu = Some(lu);
        self.factorizations += 1;
        self.steps_since_refresh = 0;
        Ok(())
    }
}

impl Default for JacobianCache {
    fn default() -> Self {
        Self::new()
    }
}

/// Newton iteration that reuses a cached Jacobian factorization while it keeps
/// contracting, rebuilding at most `max_refresh` times. Suited to implicit
/// time stepping where consecutive solves are nearby.
pub fn newton_solve_cached<F>(
    residual: F,
    x0: &DVector<f64>,
    cfg: &NewtonConfig,
    cache: &mut JacobianCache,
    pattern: Option<&SparsityPattern>,
) -> Result<(DVector<f64>, StepReport)>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    let mut x = x0.clone();
    let mut r = residual(&x);
    check_finite(&r)?;
    let mut norm = r.amax();
    let initial_norm = norm;
    let mut history = vec![norm];
    let mut total_iters = 0usize;
    let mut refreshes = 0usize;
    // struggling solves fall back to (damped) full Newton: one refresh per
    // iteration, up to roughly max_iter fresh Jacobians
    let max_refresh = cfg.max_iter.max(8);
    let iter_cap = 3 * cfg.max_iter.max(10);

    // whether the cached factorization was computed at the current iterate
    // for this residual (a cache borrowed from an earlier step was not)
    let mut lu_current = false;
    if cache.lu.is_none() {
        cache.refresh(&residual, &x, cfg, pattern, false)?;
        lu_current = true;
    }

    let fail = |iters: usize, norm: f64, history: Vec<f64>| Error::NewtonNoConvergence {
        iterations: iters,
        residual_norm: norm,
        history,
    };

    while norm > cfg.tol {
        if total_iters >= iter_cap || !norm.is_finite() || norm > 1e8 * initial_norm.max(1.0) {
            return Err(fail(total_iters, norm, history));
        }
        let lu = cache.lu.as_ref().unwrap();
        let delta = match lu.solve(&r) {
            Some(d) => d,
            None => return Err(Error::SingularJacobian),
        };
        // improvements-only backtracking: a failed line search never moves x
        let beta = cfg.damping.unwrap_or(0.5);
        let mut scale = 1.0;
        let mut accepted = None;
        while scale >= 1e-4 {
            let cand = &x - scale * &delta;
            let rc = residual(&cand);
            let nc = rc.amax();
            if nc.is_finite() && nc < norm {
                accepted = Some((cand, rc, nc));
                break;
            }
            scale *= beta;
        }
        total_iters += 1;
        match accepted {
            Some((cand, rc, nc)) => {
                let prev = norm;
                x = cand;
                r = rc;
                norm = nc;
                history.push(norm);
                lu_current = false;
                // stale or slowly contracting Jacobian: rebuild at the new x
                if norm > 0.5 * prev && norm > cfg.tol {
                    if refreshes >= max_refresh {
                        return Err(fail(total_iters, norm, history));
                    }
                    refreshes += 1;
                    cache.refresh(&residual, &x, cfg, pattern, false)?;
                    lu_current = true;
                }
            }
            None => {
                // no descent along this direction; retry once with a fresh
                // Jacobian at the unchanged x, otherwise give up
                if !lu_current && refreshes < max_refresh {
                    refreshes += 1;
                    cache.refresh(&residual, &x, cfg, pattern, false)?;
                    lu_current = true;
                } else {
                    return Err(fail(total_iters, norm, history));
                }
            }
        }
    }

    cache.steps_since_refresh += 1;
    Ok((
        x,
        StepReport {
            iterations: total_iters,
            residual_norm: norm,
            condition_estimate: cache.cond,
            dt: 0.0,
            history,
        },
    ))
}
