//! The convex precoder / common-rate subproblem for fixed equalizers and
//! weights.
//!
//! For fixed `g`, `w` and `theta`, every augmented WMSE is a convex quadratic
//! in the precoders, so minimizing
//!
//! ```text
//! u_1 theta xi_1 + u_2 theta xi_2 + u_1 cb_1 + u_2 cb_2
//! s.t. cb_1 + cb_2 >= t - theta
//!      t >= theta xi_c1
//!      t >= theta xi_c2 - (1 - theta) R_relay
//!      cb_k <= 0
//!      -cb_k + theta (1 - xi_k) >= R_k^tar
//!      |p_c|^2 + |p_1|^2 + |p_2|^2 <= P_t
//! ```
//!
//! over `(P, cb, t)` is a QCQP. `cb = -c` are the negated common-rate shares
//! and `t` is the epigraph variable of the max over the two common-stream
//! terms. Complex precoders are embedded as `[Re p; Im p]`.
//!
//! Streams and shares switched off by a scheme are removed from the
//! decision vector rather than pinned by equality constraints.

use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{check_theta, invalid, Result};
use crate::kernel::{Equalizers, MseWeights, PrecoderSet, SplitMask};
use crate::qcqp::{IpmOptions, IpmStatus, Qcqp, QuadForm};
use crate::scenario::{Scenario, User};

/// Tie-breaking regularization on the common-rate shares.
pub const SHARE_REGULARIZATION: f64 = 1e-9;

/// Which streams and common-rate shares are decision variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamMask {
    pub common: bool,
    pub private: [bool; 2],
    pub split: SplitMask,
}

impl StreamMask {
    pub const FULL: StreamMask = StreamMask {
        common: true,
        private: [true, true],
        split: SplitMask::BOTH,
    };

    pub fn validate(&self) -> Result<()> {
        if !self.common && self.split.allowed.iter().any(|a| *a) {
            return Err(invalid(
                "common-rate shares require an active common stream",
            ));
        }
        if !self.common && !self.private.iter().any(|a| *a) {
            return Err(invalid("at least one stream must be active"));
        }
        Ok(())
    }

    /// Zeroes the precoders of inactive streams.
    pub fn project(&self, p: &PrecoderSet) -> PrecoderSet {
        let mut out = p.clone();
        let zero = Complex64::new(0.0, 0.0);
        if !self.common {
            out.common.iter_mut().for_each(|z| *z = zero);
        }
        for k in 0..2 {
            if !self.private[k] {
                out.private[k].iter_mut().for_each(|z| *z = zero);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Common,
    Private(User),
}

const STREAMS: [Stream; 3] = [
    Stream::Common,
    Stream::Private(User::One),
    Stream::Private(User::Two),
];

/// Position of every decision variable in the real vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub n_t: usize,
    /// Offsets of the `[Re; Im]` blocks of `p_c`, `p_1`, `p_2`.
    pub precoder: [Option<usize>; 3],
    pub c_bar: [Option<usize>; 2],
    pub epigraph: Option<usize>,
    pub dim: usize,
}

impl Layout {
    pub fn new(n_t: usize, mask: &StreamMask) -> Self {
        let mut next = 0;
        let mut take = |active: bool, width: usize| {
            active.then(|| {
                let at = next;
                next += width;
                at
            })
        };
        let precoder = [
            take(mask.common, 2 * n_t),
            take(mask.private[0], 2 * n_t),
            take(mask.private[1], 2 * n_t),
        ];
        let c_bar = [
            take(mask.split.allowed[0], 1),
            take(mask.split.allowed[1], 1),
        ];
        let epigraph = take(mask.common, 1);
        Self {
            n_t,
            precoder,
            c_bar,
            epigraph,
            dim: next,
        }
    }

    fn block(&self, stream: Stream) -> Option<usize> {
        match stream {
            Stream::Common => self.precoder[0],
            Stream::Private(u) => self.precoder[1 + u.index()],
        }
    }

    pub fn pack(&self, p: &PrecoderSet, c_bar: [f64; 2], epigraph: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim);
        for (i, v) in [&p.common, &p.private[0], &p.private[1]].iter().enumerate() {
            if let Some(o) = self.precoder[i] {
                for (m, z) in v.iter().enumerate() {
                    x[o + m] = z.re;
                    x[o + self.n_t + m] = z.im;
                }
            }
        }
        for k in 0..2 {
            if let Some(o) = self.c_bar[k] {
                x[o] = c_bar[k];
            }
        }
        if let Some(o) = self.epigraph {
            x[o] = epigraph;
        }
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> (PrecoderSet, [f64; 2], f64) {
        let mut p = PrecoderSet::zeros(self.n_t);
        let [p1, p2] = &mut p.private;
        for (i, v) in [&mut p.common, p1, p2].into_iter().enumerate() {
            if let Some(o) = self.precoder[i] {
                for (m, z) in v.iter_mut().enumerate() {
                    *z = Complex64::new(x[o + m], x[o + self.n_t + m]);
                }
            }
        }
        let c_bar = [
            self.c_bar[0].map_or(0.0, |o| x[o]),
            self.c_bar[1].map_or(0.0, |o| x[o]),
        ];
        let t = self.epigraph.map_or(0.0, |o| x[o]);
        (p, c_bar, t)
    }

    /// `h^H p_stream` as a pair of real linear functions `(re, im)`.
    fn received(&self, h: &[Complex64], stream: Stream) -> Option<(DVector<f64>, DVector<f64>)> {
        let o = self.block(stream)?;
        let mut re = DVector::zeros(self.dim);
        let mut im = DVector::zeros(self.dim);
        for (m, hm) in h.iter().enumerate() {
            re[o + m] = hm.re;
            re[o + self.n_t + m] = hm.im;
            im[o + m] = -hm.im;
            im[o + self.n_t + m] = hm.re;
        }
        Some((re, im))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `cb_1 + cb_2 >= t - theta`
    CommonBudget,
    /// `t >= theta xi_ck` (user 1) or `t >= theta xi_c2 - (1-theta) R_relay`
    Epigraph(User),
    ShareSign(User),
    Qos(User),
    Power,
}

#[derive(Debug, Clone)]
pub struct SubproblemSpec<'a> {
    pub scenario: &'a Scenario,
    pub theta: f64,
    pub weights_u: [f64; 2],
    pub g: Equalizers,
    pub w: MseWeights,
    pub r_relay: f64,
    pub tolerance: f64,
    pub mask: StreamMask,
    /// Optional initial point `(P, cb)`.
    pub warm_start: Option<(PrecoderSet, [f64; 2])>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub p: PrecoderSet,
    pub c_bar: [f64; 2],
    pub epigraph: f64,
    pub objective: f64,
    pub status: SolveStatus,
    /// Multipliers of the assembled constraints, in assembly order.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

/// The assembled program with bookkeeping.
#[derive(Debug, Clone)]
pub struct AssembledQcqp {
    pub program: Qcqp,
    pub layout: Layout,
    pub kinds: Vec<ConstraintKind>,
    /// Constant constraints dropped at assembly time that are violated.
    pub violated_constants: Vec<ConstraintKind>,
}

impl<'a> SubproblemSpec<'a> {
    pub fn new(
        scenario: &'a Scenario,
        theta: f64,
        weights_u: [f64; 2],
        g: Equalizers,
        w: MseWeights,
    ) -> Self {
        Self {
            scenario,
            theta,
            weights_u,
            g,
            w,
            r_relay: crate::kernel::relay_link_rate(scenario),
            tolerance: 1e-8,
            mask: StreamMask::FULL,
            warm_start: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        self.mask.validate()?;
        if !self.weights_u.iter().all(|u| u.is_finite() && *u >= 0.0) {
            return Err(invalid("user weights must be finite and non-negative"));
        }
        let w_ok = self
            .w
            .common
            .iter()
            .chain(self.w.private.iter())
            .all(|w| w.is_finite() && *w > 0.0);
        if !w_ok {
            return Err(invalid("MSE weights must be finite and positive"));
        }
        if !(self.r_relay.is_finite() && self.r_relay >= 0.0) {
            return Err(invalid("relay rate must be finite and non-negative"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        Ok(())
    }

    fn objective_scale(&self) -> f64 {
        self.weights_u[0].max(self.weights_u[1]).max(1.0)
    }

    /// `eps(P)` for the stream decoded at `user` with equalizer `g`.
    fn mse_form(&self, layout: &Layout, user: User, own: Stream, g: Complex64) -> QuadForm {
        let h = self.scenario.channel(user);
        let mut form = QuadForm::zero(layout.dim);
        let g_sq = g.norm_sqr();
        // interference-plus-signal power seen by this equalizer
        let seen: &[Stream] = match own {
            Stream::Common => &STREAMS,
            Stream::Private(_) => &STREAMS[1..],
        };
        for &stream in seen {
            if let Some((re, im)) = layout.received(h, stream) {
                form.add_abs_sq(&re, &im, g_sq);
            }
        }
        form.constant = g_sq * self.scenario.noise(user) + 1.0;
        if let Some((re, im)) = layout.received(h, own) {
            // -2 Re{g z} = -2 (g_re z_re - g_im z_im)
            form.add_linear(&re, -2.0 * g.re);
            form.add_linear(&im, 2.0 * g.im);
        }
        form
    }

    /// Augmented WMSE in bits for fixed weight: `1 + (w eps - ln w - 1) / ln 2`.
    fn xi_form(&self, layout: &Layout, user: User, own: Stream) -> QuadForm {
        let k = user.index();
        let (g, w) = match own {
            Stream::Common => (self.g.common[k], self.w.common[k]),
            Stream::Private(_) => (self.g.private[k], self.w.private[k]),
        };
        let mse = self.mse_form(layout, user, own, g);
        let mut xi = QuadForm::zero(layout.dim);
        xi.add_scaled(&mse, w / LN_2);
        xi.constant += 1.0 - (w.ln() + 1.0) / LN_2;
        xi
    }

    pub fn assemble(&self) -> AssembledQcqp {
        let layout = Layout::new(self.scenario.n_t, &self.mask);
        let n = layout.dim;
        let theta = self.theta;
        let u = self.weights_u;
        let xi_p = [
            self.xi_form(&layout, User::One, Stream::Private(User::One)),
            self.xi_form(&layout, User::Two, Stream::Private(User::Two)),
        ];

        let mut objective = QuadForm::zero(n);
        for k in 0..2 {
            objective.add_scaled(&xi_p[k], u[k] * theta);
            if let Some(o) = layout.c_bar[k] {
                objective.add_coordinate(o, u[k]);
                objective.add_square(o, SHARE_REGULARIZATION);
            }
        }

        let mut constraints = Vec::new();
        let mut kinds = Vec::new();
        let mut violated_constants = Vec::new();
        let mut push = |form: QuadForm, kind: ConstraintKind| {
            let constant_only = form.hess.is_none() && form.lin.iter().all(|v| *v == 0.0);
            if constant_only {
                if form.constant > 0.0 {
                    violated_constants.push(kind);
                }
            } else {
                constraints.push(form);
                kinds.push(kind);
            }
        };

        if let Some(t) = layout.epigraph {
            let mut budget = QuadForm::zero(n);
            budget.add_coordinate(t, 1.0);
            budget.constant = -theta;
            for o in layout.c_bar.iter().flatten() {
                budget.add_coordinate(*o, -1.0);
            }
            push(budget, ConstraintKind::CommonBudget);
            for user in User::BOTH {
                let mut epi = QuadForm::zero(n);
                epi.add_scaled(&self.xi_form(&layout, user, Stream::Common), theta);
                epi.add_coordinate(t, -1.0);
                if user == User::Two {
                    epi.constant -= (1.0 - theta) * self.r_relay;
                }
                push(epi, ConstraintKind::Epigraph(user));
            }
        }
        for user in User::BOTH {
            if let Some(o) = layout.c_bar[user.index()] {
                let mut sign = QuadForm::zero(n);
                sign.add_coordinate(o, 1.0);
                push(sign, ConstraintKind::ShareSign(user));
            }
        }
        for user in User::BOTH {
            let k = user.index();
            if self.scenario.r_tar[k] <= 0.0 {
                continue;
            }
            // R_tar + cb_k - theta + theta xi_k <= 0
            let mut qos = QuadForm::zero(n);
            qos.add_scaled(&xi_p[k], theta);
            qos.constant += self.scenario.r_tar[k] - theta;
            if let Some(o) = layout.c_bar[k] {
                qos.add_coordinate(o, 1.0);
            }
            push(qos, ConstraintKind::Qos(user));
        }
        let mut power = QuadForm::zero(n);
        for o in layout.precoder.iter().flatten() {
            for i in 0..2 * layout.n_t {
                power.add_square(o + i, 1.0);
            }
        }
        power.constant = -self.scenario.p_t;
        push(power, ConstraintKind::Power);

        AssembledQcqp {
            program: Qcqp {
                objective,
                constraints,
            },
            layout,
            kinds,
            violated_constants,
        }
    }

    fn ipm_options(&self) -> IpmOptions {
        IpmOptions {
            gap_tol: self.tolerance,
            ..IpmOptions::default()
        }
    }

    /// Initial point: the warm start when given, with the epigraph variable
    /// placed midway inside its feasible interval.
    fn initial_point(&self, asm: &AssembledQcqp) -> DVector<f64> {
        let layout = &asm.layout;
        let Some((p, c_bar)) = &self.warm_start else {
            return DVector::zeros(layout.dim);
        };
        let p = self.mask.project(p);
        let mut x = layout.pack(&p, *c_bar, 0.0);
        if let Some(t) = layout.epigraph {
            let lower = asm
                .program
                .constraints
                .iter()
                .zip(&asm.kinds)
                .filter(|(_, k)| matches!(k, ConstraintKind::Epigraph(_)))
                .map(|(c, _)| c.eval(&x))
                .fold(f64::NEG_INFINITY, f64::max);
            let upper = self.theta + c_bar.iter().sum::<f64>();
            x[t] = if lower.is_finite() {
                0.5 * (lower + upper)
            } else {
                upper
            };
        }
        x
    }

    pub fn solve(&self) -> Result<SubproblemSolution> {
        self.validate()?;
        let asm = self.assemble();
        let layout = &asm.layout;
        if !asm.violated_constants.is_empty() {
            let x0 = self.initial_point(&asm);
            let (p, c_bar, epigraph) = layout.unpack(&x0);
            return Ok(SubproblemSolution {
                p,
                c_bar,
                epigraph,
                objective: asm.program.objective.eval(&x0),
                status: SolveStatus::Infeasible,
                duals: vec![0.0; asm.program.constraints.len()],
                iterations: 0,
            });
        }
        let x0 = self.initial_point(&asm);
        // solved with the objective normalized to unit weight scale
        let scale = self.objective_scale();
        let mut program = asm.program.clone();
        program.objective = QuadForm::zero(layout.dim);
        program
            .objective
            .add_scaled(&asm.program.objective, 1.0 / scale);
        let res = program.solve(&x0, &self.ipm_options());
        let (p, c_bar, epigraph) = layout.unpack(&res.x);
        let status = match res.status {
            IpmStatus::Optimal => SolveStatus::Optimal,
            IpmStatus::Infeasible => SolveStatus::Infeasible,
            IpmStatus::MaxIter => SolveStatus::MaxIter,
        };
        Ok(SubproblemSolution {
            p,
            c_bar,
            epigraph,
            objective: res.objective * scale,
            status,
            duals: res.lambda.iter().map(|l| l * scale).collect(),
            iterations: res.iterations,
        })
    }

    /// Largest KKT residual of `sol`, normalized by `max(1, u_1, u_2)`.
    pub fn kkt_residual(&self, sol: &SubproblemSolution) -> f64 {
        let asm = self.assemble();
        let x = asm.layout.pack(&sol.p, sol.c_bar, sol.epigraph);
        let m = asm.program.constraints.len();
        let lambda = if sol.duals.len() == m {
            DVector::from_column_slice(&sol.duals)
        } else {
            DVector::zeros(m)
        };
        let report = asm.program.kkt(&x, &lambda);
        let violated = if asm.violated_constants.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
        report.max().max(violated) / self.objective_scale()
    }

    /// Largest constraint value at `sol` (positive means violated).
    pub fn max_violation(&self, sol: &SubproblemSolution) -> f64 {
        let asm = self.assemble();
        let x = asm.layout.pack(&sol.p, sol.c_bar, sol.epigraph);
        asm.program.max_violation(&x)
    }
}
