//! Dense convex QCQP in inequality form and a log-barrier interior-point
//! solver for it.
//!
//! ```text
//! minimize    f_0(x)
//! subject to  f_i(x) <= 0,   i = 1..m
//! f_i(x) = 0.5 x' H_i x + q_i' x + r_i,   H_i positive semidefinite
//! ```
//!
//! The solver follows the central path of `t f_0(x) - sum log(-f_i(x))`:
//! damped Newton centering with Armijo backtracking, then `t <- mu t` until
//! the duality gap `m / t` is below tolerance. A strictly feasible start is
//! found by a phase-1 problem that minimizes the largest constraint value.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    /// `None` for affine forms.
    pub hess: Option<DMatrix<f64>>,
    pub lin: DVector<f64>,
    pub constant: f64,
}

impl QuadForm {
    pub fn zero(n: usize) -> Self {
        Self {
            hess: None,
            lin: DVector::zeros(n),
            constant: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let quad = match &self.hess {
            Some(h) => 0.5 * x.dot(&(h * x)),
            None => 0.0,
        };
        quad + self.lin.dot(x) + self.constant
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.hess {
            Some(h) => h * x + &self.lin,
            None => self.lin.clone(),
        }
    }

    fn hess_mut(&mut self) -> &mut DMatrix<f64> {
        let n = self.dim();
        self.hess.get_or_insert_with(|| DMatrix::zeros(n, n))
    }

    /// Adds `coeff * ((re' x)^2 + (im' x)^2)`, i.e. `coeff * |z|^2` for the
    /// complex linear function `z = re' x + j im' x`.
    pub fn add_abs_sq(&mut self, re: &DVector<f64>, im: &DVector<f64>, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let h = self.hess_mut();
        h.ger(2.0 * coeff, re, re, 1.0);
        h.ger(2.0 * coeff, im, im, 1.0);
    }

    pub fn add_linear(&mut self, v: &DVector<f64>, coeff: f64) {
        self.lin.axpy(coeff, v, 1.0);
    }

    pub fn add_coordinate(&mut self, index: usize, coeff: f64) {
        self.lin[index] += coeff;
    }

    pub fn add_square(&mut self, index: usize, coeff: f64) {
        let h = self.hess_mut();
        h[(index, index)] += 2.0 * coeff;
    }

    /// `self += coeff * other`.
    pub fn add_scaled(&mut self, other: &QuadForm, coeff: f64) {
        if let Some(oh) = &other.hess {
            let h = self.hess_mut();
            *h += oh * coeff;
        }
        self.lin.axpy(coeff, &other.lin, 1.0);
        self.constant += coeff * other.constant;
    }

    pub fn min_hessian_eigenvalue(&self) -> f64 {
        match &self.hess {
            Some(h) => h.clone().symmetric_eigen().eigenvalues.min(),
            None => 0.0,
        }
    }

    /// Embeds the form into a space with one extra trailing coordinate.
    fn lifted(&self) -> QuadForm {
        let n = self.dim();
        let hess = self.hess.as_ref().map(|h| {
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(h);
            big
        });
        let mut lin = DVector::zeros(n + 1);
        lin.rows_mut(0, n).copy_from(&self.lin);
        QuadForm {
            hess,
            lin,
            constant: self.constant,
        }
    }
}

/// `minimize objective(x)` subject to `constraints[i](x) <= 0`.
#[derive(Debug, Clone)]
pub struct Qcqp {
    pub objective: QuadForm,
    pub constraints: Vec<QuadForm>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub max_iter: usize,
    /// Duality gap tolerance `m / t`.
    pub gap_tol: f64,
    /// Declared infeasible when the phase-1 optimum exceeds this.
    pub infeasibility_tol: f64,
    pub mu: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gap_tol: 1e-8,
            infeasibility_tol: 1e-6,
            mu: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub objective: f64,
    pub status: IpmStatus,
    pub iterations: usize,
    /// Barrier value before and after every accepted Newton step, at the
    /// barrier parameter of that step.
    pub merit_history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

impl Qcqp {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn kkt(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> KktReport {
        let mut grad = self.objective.gradient(x);
        let mut primal: f64 = 0.0;
        let mut dual: f64 = 0.0;
        let mut comp: f64 = 0.0;
        for (c, &l) in self.constraints.iter().zip(lambda.iter()) {
            let f = c.eval(x);
            grad.axpy(l, &c.gradient(x), 1.0);
            primal = primal.max(f);
            dual = dual.max(-l);
            comp = comp.max((l * f).abs());
        }
        KktReport {
            stationarity: grad.amax(),
            primal,
            dual,
            complementarity: comp,
        }
    }

    /// Solves from `x0`, which need not be feasible.
    pub fn solve(&self, x0: &DVector<f64>, opts: &IpmOptions) -> IpmResult {
        let m = self.constraints.len();
        if m == 0 {
            return self.solve_unconstrained(x0);
        }
        let mut start = x0.clone();
        if self.max_violation(&start) >= 0.0 {
            let (x1, s_star) = self.phase_one(x0, opts);
            if s_star > opts.infeasibility_tol {
                return IpmResult {
                    objective: self.objective.eval(&x1),
                    x: x1,
                    lambda: DVector::zeros(m),
                    status: IpmStatus::Infeasible,
                    iterations: 0,
                    merit_history: Vec::new(),
                };
            }
            if s_star >= 0.0 {
                // Feasible only up to tolerance: solve a slightly relaxed copy.
                let relax = s_star + 1e-10;
                let mut relaxed = self.clone();
                for c in &mut relaxed.constraints {
                    c.constant -= relax;
                }
                let (x2, s2) = relaxed.phase_one(&x1, opts);
                if s2 >= 0.0 {
                    return IpmResult {
                        objective: self.objective.eval(&x2),
                        x: x2,
                        lambda: DVector::zeros(m),
                        status: IpmStatus::Infeasible,
                        iterations: 0,
                        merit_history: Vec::new(),
                    };
                }
                let mut res =
                    barrier_method(&relaxed.objective, &relaxed.constraints, x2, opts, None);
                res.objective = self.objective.eval(&res.x);
                return res;
            }
            start = x1;
        }
        barrier_method(&self.objective, &self.constraints, start, opts, None)
    }

    fn solve_unconstrained(&self, x0: &DVector<f64>) -> IpmResult {
        let n = self.dim();
        let g = self.objective.gradient(x0);
        let h = self
            .objective
            .hess
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(n, n));
        let dx = solve_spd(h, -g).unwrap_or_else(|| DVector::zeros(n));
        let x = x0 + dx;
        IpmResult {
            objective: self.objective.eval(&x),
            x,
            lambda: DVector::zeros(0),
            status: IpmStatus::Optimal,
            iterations: 1,
            merit_history: Vec::new(),
        }
    }

    /// Minimizes `s` subject to `f_i(x) <= s`, returning the final `x` and
    /// its largest constraint value.
    fn phase_one(&self, x0: &DVector<f64>, opts: &IpmOptions) -> (DVector<f64>, f64) {
        let n = self.dim();
        let mut objective = QuadForm::zero(n + 1);
        objective.lin[n] = 1.0;
        let constraints: Vec<QuadForm> = self
            .constraints
            .iter()
            .map(|c| {
                let mut l = c.lifted();
                l.lin[n] = -1.0;
                l
            })
            .collect();
        let worst = self.max_violation(x0);
        let mut y0 = DVector::zeros(n + 1);
        y0.rows_mut(0, n).copy_from(x0);
        y0[n] = worst + 1.0 + 0.1 * worst.abs();
        let stop = |y: &DVector<f64>, gap: f64| {
            let s = y[y.len() - 1];
            (s < 0.0 && (gap < -0.5 * s || s < -1.0)) || s - gap > opts.infeasibility_tol
        };
        let res = barrier_method(&objective, &constraints, y0, opts, Some(&stop));
        let x = res.x.rows(0, n).into_owned();
        let s = self.max_violation(&x);
        (x, s)
    }

    /// Writes all forms in a MatrixMarket-style text layout.
    pub fn write_matrix_market(&self, mut out: impl Write) -> io::Result<()> {
        let n = self.dim();
        writeln!(out, "% convex QCQP: minimize f_0(x) s.t. f_i(x) <= 0")?;
        writeln!(out, "% f(x) = 0.5 x' H x + q' x + r")?;
        writeln!(out, "% n = {n}, m = {}", self.constraints.len())?;
        let forms = std::iter::once(("objective".to_string(), &self.objective)).chain(
            self.constraints
                .iter()
                .enumerate()
                .map(|(i, c)| (format!("constraint {}", i + 1), c)),
        );
        for (name, form) in forms {
            writeln!(out, "% form {name}")?;
            writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
            let entries: Vec<(usize, usize, f64)> = match &form.hess {
                Some(h) => (0..n)
                    .flat_map(|j| (j..n).map(move |i| (i, j)))
                    .filter_map(|(i, j)| {
                        let v = h[(i, j)];
                        (v != 0.0).then_some((i, j, v))
                    })
                    .collect(),
                None => Vec::new(),
            };
            writeln!(out, "{n} {n} {}", entries.len())?;
            for (i, j, v) in entries {
                writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
            }
            writeln!(out, "%%MatrixMarket matrix array real general")?;
            writeln!(out, "{n} 1")?;
            for v in form.lin.iter() {
                writeln!(out, "{v:e}")?;
            }
            writeln!(out, "% constant {:e}", form.constant)?;
        }
        Ok(())
    }
}

type StopRule<'a> = &'a dyn Fn(&DVector<f64>, f64) -> bool;

/// Barrier function `t f_0(x) - sum log(-f_i(x))`, or `None` outside the
/// strict interior.
fn barrier_value(
    objective: &QuadForm,
    constraints: &[QuadForm],
    x: &DVector<f64>,
    t: f64,
) -> Option<f64> {
    let mut value = t * objective.eval(x);
    for c in constraints {
        let f = c.eval(x);
        if !(f < 0.0) {
            return None;
        }
        value -= (-f).ln();
    }
    Some(value)
}

/// Log-barrier path following from a strictly feasible `x0`. The stop rule
/// is consulted after every centering with the current point and the
/// duality gap `m / t`.
fn barrier_method(
    objective: &QuadForm,
    constraints: &[QuadForm],
    x0: DVector<f64>,
    opts: &IpmOptions,
    stop: Option<StopRule<'_>>,
) -> IpmResult {
    const ARMIJO: f64 = 0.01;
    const SHRINK: f64 = 0.5;
    const CENTERING_TOL: f64 = 1e-10;

    let n = objective.dim();
    let m = constraints.len();
    let mut x = x0;
    debug_assert!(constraints.iter().all(|c| c.eval(&x) < 0.0));
    let mut t = 1.0;
    let mut merit_history = Vec::new();
    let mut status = IpmStatus::MaxIter;
    let mut iterations = 0;
    let hess_base = objective
        .hess
        .clone()
        .unwrap_or_else(|| DMatrix::zeros(n, n));
    let mut hess = DMatrix::zeros(n, n);
    let mut last_dx: Option<DVector<f64>> = None;

    'outer: loop {
        // centering at the current t
        let mut centered = false;
        while iterations < opts.max_iter {
            let f: Vec<f64> = constraints.iter().map(|c| c.eval(&x)).collect();
            let mut grad = objective.gradient(&x) * t;
            hess.copy_from(&hess_base);
            hess *= t;
            for (c, &fi) in constraints.iter().zip(&f) {
                let d = -fi;
                let gi = c.gradient(&x);
                grad.axpy(1.0 / d, &gi, 1.0);
                if let Some(h) = &c.hess {
                    hess.zip_apply(h, |a, b| *a += b / d);
                }
                hess.ger(1.0 / (d * d), &gi, &gi, 1.0);
            }
            let Some(dx) = solve_spd(hess.clone(), -&grad) else {
                break 'outer;
            };
            let decrement = -grad.dot(&dx);
            last_dx = Some(dx.clone());
            let Some(before) = barrier_value(objective, constraints, &x, t) else {
                break 'outer;
            };
            if decrement / 2.0 <= CENTERING_TOL.max(f64::EPSILON * before.abs()) {
                centered = true;
                break;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let x_new = &x + &dx * step;
                if let Some(after) = barrier_value(objective, constraints, &x_new, t) {
                    if after < before && after <= before - ARMIJO * step * decrement {
                        merit_history.push((before, after));
                        x = x_new;
                        accepted = true;
                        break;
                    }
                }
                step *= SHRINK;
            }
            iterations += 1;
            if !accepted {
                // no further progress possible in floating point
                centered = true;
                break;
            }
        }
        let gap = m as f64 / t;
        if let Some(rule) = stop {
            if centered && rule(&x, gap) {
                status = IpmStatus::Optimal;
                break;
            }
        }
        if centered && gap <= opts.gap_tol {
            status = IpmStatus::Optimal;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        t *= opts.mu;
    }
    // multipliers from the linearized centering condition at x + dx
    let lambda = DVector::from_iterator(
        m,
        constraints.iter().map(|c| {
            let d = -c.eval(&x);
            let correction = last_dx
                .as_ref()
                .map_or(0.0, |dx| c.gradient(&x).dot(dx) / (d * d));
            ((1.0 / d + correction) / t).max(0.0)
        }),
    );
    IpmResult {
        objective: objective.eval(&x),
        x,
        lambda,
        status,
        iterations,
        merit_history,
    }
}

fn solve_spd(mut a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(1.0, f64::max);
    let mut reg = 0.0;
    for attempt in 0..8 {
        if let Some(ch) = a.clone().cholesky() {
            let x = ch.solve(&b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        let next = scale * 1e-14 * 100f64.powi(attempt);
        for i in 0..n {
            a[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}
