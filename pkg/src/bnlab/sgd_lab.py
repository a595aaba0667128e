"""Finite-N teacher-student SGD for vanilla, WN, WN+gamma-decay and BN students.

Conventions
-----------
Inputs are ``x ~ N(0, I/N)`` and the teacher satisfies ``|w*|^2 = N``.  The
per-batch objective is

    1/2 * mean_batch (y - y_hat)^2  [+ 1/2 * zeta * gamma^2 for WN+gamma decay]

so that a batch of one reproduces the online update rule with gradient factor
``delta = g'(u) (y - g(u))`` and decay step ``-eta zeta gamma``.

Student outputs:

* vanilla   ``g(w.x)``
* WN        ``g(sqrt(N) gamma w.x / |w|)``
* BN        ``g(gamma (h - mu_B) / sigma_B)``, ``h = w.x``, with the batch mean
  and biased batch standard deviation; the shift is frozen at zero.  At
  evaluation time ``sigma_B`` is replaced by the standard deviation of ``h``
  over the training set (the limit of running batch averages) and ``mu_B``
  by the population mean of ``h``, which is zero for zero-mean inputs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import Activation, DomainError, Method, as_activation, as_method
from .dynamics import Trajectory
from .kernels import gen_integral

BN_EPS = 1e-12


@dataclass(frozen=True)
class TeacherStudentConfig:
    N: int = 1024
    M: int = 32
    alpha: float = 1.0
    P: int | None = None
    S: float = 0.25
    zeta: float = 0.0
    eta: float = 0.5
    act: Activation = Activation.IDENTITY
    method: Method = Method.VANILLA
    seed: int = 42
    epochs: int = 5000
    # artifact choices: stopping rule, schedule, initial weight scale, test set
    tol: float = 1e-6
    lr_decay: float = 1.0
    min_epochs: int = 10
    init_scale: float = 1.0
    gamma_init: float = 1.0
    n_test: int = 20000

    def __post_init__(self):
        object.__setattr__(self, "act", as_activation(self.act))
        object.__setattr__(self, "method", as_method(self.method))
        if self.P is None:
            object.__setattr__(self, "P", max(1, int(round(self.alpha * self.N))))
        problems = self.diagnostics()
        if problems:
            raise DomainError("; ".join(problems))

    def diagnostics(self) -> list[str]:
        out = []
        if self.N < 64:
            out.append("N >= 64 required")
        if self.M < 2:
            out.append("M >= 2 required")
        if not self.alpha > 0:
            out.append("alpha > 0 required")
        if self.S < 0:
            out.append("S >= 0 required")
        if self.zeta < 0:
            out.append("zeta >= 0 required")
        if not self.eta > 0:
            out.append("eta > 0 required")
        if self.P is not None and self.P < self.M:
            out.append("P >= M required")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["act"] = self.act.value
        d["method"] = self.method.value
        return d


@dataclass
class StudentState:
    w: np.ndarray
    gamma: float = 1.0
    beta_shift: float = 0.0


@dataclass
class RunResult:
    order_trace: Trajectory
    train_loss_trace: list[float]
    gen_error: float
    diverged: bool
    gen_error_mc: float = float("nan")
    gen_error_mc_stderr: float = float("nan")
    epochs_run: int = 0
    student: StudentState | None = field(default=None, repr=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "Q", "R", "L", "train_loss"])
            for epoch, row, loss in zip(
                self.order_trace.times, self.order_trace.states, self.train_loss_trace
            ):
                writer.writerow([int(epoch)] + [f"{v:.17g}" for v in (*row, loss)])


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

def make_teacher(N: int, seed: int) -> np.ndarray:
    """Gaussian teacher rescaled so that |w*|^2 / N = 1 exactly."""
    rng = np.random.default_rng([seed, 0])
    w = rng.standard_normal(N)
    return w * math.sqrt(N) / np.linalg.norm(w)


def sample_inputs(N: int, count: int, seed: int) -> np.ndarray:
    """``count`` rows of i.i.d. N(0, 1/N) entries."""
    rng = np.random.default_rng([seed, 1])
    return rng.standard_normal((count, N)) / math.sqrt(N)


def _initial_student(cfg: TeacherStudentConfig, rng: np.random.Generator) -> StudentState:
    w = rng.standard_normal(cfg.N)
    w *= cfg.init_scale * math.sqrt(cfg.N) / np.linalg.norm(w)
    return StudentState(w=w, gamma=cfg.gamma_init)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _bn_sigma(h: np.ndarray) -> float:
    return math.sqrt(float(np.var(h)) + BN_EPS)


def predict(state: StudentState, X: np.ndarray, method: Method, act: Activation,
            sigma: float | None = None) -> np.ndarray:
    """Student output.

    BN without ``sigma`` normalizes with the statistics of ``X`` itself (batch
    mode); with ``sigma`` given it is the inference form ``gamma h / sigma``.
    """
    h = X @ state.w
    if method is Method.VANILLA:
        u = h
    elif method is Method.BN:
        if sigma is None:
            u = state.gamma * (h - h.mean()) / _bn_sigma(h)
        else:
            u = state.gamma * h / sigma
    else:
        u = math.sqrt(len(state.w)) * state.gamma * h / np.linalg.norm(state.w)
    return act(u + state.beta_shift)


def batch_loss(state: StudentState, X: np.ndarray, y: np.ndarray,
               method: Method, act: Activation, zeta: float = 0.0) -> float:
    """Per-batch training objective (batch statistics for BN)."""
    r = y - predict(state, X, method, act)
    loss = 0.5 * float(np.mean(r * r))
    if method is Method.WN_GAMMA_DECAY:
        loss += 0.5 * zeta * state.gamma**2
    return loss


def gradients(state: StudentState, X: np.ndarray, y: np.ndarray,
              method: Method, act: Activation, zeta: float = 0.0) -> tuple[np.ndarray, float]:
    """Gradient of ``batch_loss`` with respect to (w, gamma)."""
    M = len(y)
    w, gamma = state.w, state.gamma
    h = X @ w
    if method is Method.VANILLA:
        delta = act.prime(h) * (y - act(h))
        return -(X.T @ delta) / M, 0.0

    if method is Method.BN:
        sigma = _bn_sigma(h)
        z = (h - h.mean()) / sigma
        u = gamma * z
        delta = act.prime(u) * (y - act(u))
        g_gamma = -float(delta @ z) / M
        g_z = -gamma * delta / M
        g_h = (g_z - g_z.mean() - z * float(g_z @ z) / M) / sigma
        return X.T @ g_h, g_gamma

    norm = np.linalg.norm(w)
    scale = math.sqrt(len(w)) / norm
    u = scale * gamma * h
    delta = act.prime(u) * (y - act(u))
    g_gamma = -scale * float(delta @ h) / M
    # projection onto the complement of w: w is scale invariant
    g_w = -scale * gamma * (X.T @ delta - w * float(delta @ h) / norm**2) / M
    if method is Method.WN_GAMMA_DECAY:
        g_gamma += zeta * gamma
    return g_w, g_gamma


def sgd_step(state: StudentState, X: np.ndarray, y: np.ndarray,
             cfg: TeacherStudentConfig, eta: float | None = None) -> StudentState:
    eta = cfg.eta if eta is None else eta
    with np.errstate(all="ignore"):
        g_w, g_gamma = gradients(state, X, y, cfg.method, cfg.act, cfg.zeta)
        new = StudentState(w=state.w - eta * g_w, gamma=state.gamma - eta * g_gamma,
                           beta_shift=state.beta_shift)
    if not (np.all(np.isfinite(new.w)) and math.isfinite(new.gamma)):
        raise FloatingPointError("non-finite parameters")
    return new


# ---------------------------------------------------------------------------
# order parameters and generalization
# ---------------------------------------------------------------------------

def effective_weights(state: StudentState, method: Method,
                      X_train: np.ndarray | None = None) -> np.ndarray:
    """Weight vector ``w~`` of the inference-time predictor ``g(w~.x)``."""
    w = state.w
    if method is Method.VANILLA:
        return w.copy()
    if method is Method.BN:
        if X_train is None:
            raise ValueError("BN inference needs the training inputs")
        return state.gamma * w / _bn_sigma(X_train @ w)
    return math.sqrt(len(w)) * state.gamma * w / np.linalg.norm(w)


def order_parameters(state: StudentState, teacher: np.ndarray, method: Method,
                     X_train: np.ndarray | None = None) -> tuple[float, float, float]:
    N = len(teacher)
    wt = effective_weights(state, method, X_train)
    Q = float(np.linalg.norm(wt)) / math.sqrt(N)
    R = float(wt @ teacher) / (Q * N) if Q > 0 else 0.0
    L = float(np.linalg.norm(state.w)) / math.sqrt(N)
    return Q, min(max(R, -1.0), 1.0), L


def test_error(state: StudentState, teacher: np.ndarray, method: Method, act: Activation,
               n_test: int, seed: int, X_train: np.ndarray | None = None) -> tuple[float, float]:
    """Fresh-test-set estimate of E[(w*.x - y_hat)^2] against the noiseless teacher."""
    wt = effective_weights(state, method, X_train)
    X = sample_inputs(len(teacher), n_test, seed + 7919)
    err = (X @ teacher - act(X @ wt)) ** 2
    return float(err.mean()), float(err.std(ddof=1) / math.sqrt(n_test))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def make_dataset(cfg: TeacherStudentConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Teacher, training inputs and labels with fixed per-example noise of variance S."""
    teacher = make_teacher(cfg.N, cfg.seed)
    X = sample_inputs(cfg.N, cfg.P, cfg.seed)
    noise = np.random.default_rng([cfg.seed, 2]).standard_normal(cfg.P) * math.sqrt(cfg.S)
    return teacher, X, X @ teacher + noise


def _train_loss(state, X, y, cfg) -> float:
    with np.errstate(all="ignore"):
        r = y - predict(state, X, cfg.method, cfg.act)
        return 0.5 * float(np.mean(r * r))


def run_experiment(cfg: TeacherStudentConfig) -> RunResult:
    """Train on a fixed data set with shuffled, without-replacement mini-batches."""
    teacher, X, y = make_dataset(cfg)
    rng = np.random.default_rng([cfg.seed, 3])
    state = _initial_student(cfg, rng)
    n_batches = cfg.P // cfg.M

    times, states, losses = [], [], []

    def record(epoch):
        times.append(epoch)
        states.append(order_parameters(state, teacher, cfg.method, X))
        losses.append(_train_loss(state, X, y, cfg))

    record(0)
    eta = cfg.eta
    diverged = False
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(cfg.P)
        try:
            for b in range(n_batches):
                idx = perm[b * cfg.M:(b + 1) * cfg.M]
                state = sgd_step(state, X[idx], y[idx], cfg, eta)
        except FloatingPointError:
            diverged = True
            break
        record(epoch)
        if not math.isfinite(losses[-1]):
            diverged = True
            break
        prev, cur = losses[-2], losses[-1]
        if epoch >= cfg.min_epochs and abs(prev - cur) <= cfg.tol * max(abs(prev), 1e-300):
            break
        eta *= cfg.lr_decay

    trace = Trajectory(np.asarray(times, dtype=float), np.asarray(states), diverged)
    if diverged:
        return RunResult(trace, losses, float("nan"), True, epochs_run=epoch, student=state)
    Q, R, _ = trace.final
    gen = gen_integral(Q, R, Activation.IDENTITY, cfg.act)
    mc, mc_err = test_error(state, teacher, cfg.method, cfg.act, cfg.n_test, cfg.seed, X)
    return RunResult(trace, losses, gen, False, mc, mc_err, epoch, state)


def student_from_order(Q: float, R: float, L: float, teacher: np.ndarray, seed: int,
                       method: Method = Method.WN_GAMMA_DECAY) -> StudentState:
    """A student realizing the order parameters (Q, R, L) exactly."""
    N = len(teacher)
    rng = np.random.default_rng([seed, 4])
    v = rng.standard_normal(N)
    t_hat = teacher / np.linalg.norm(teacher)
    v -= (v @ t_hat) * t_hat
    v /= np.linalg.norm(v)
    direction = R * t_hat + math.sqrt(max(1.0 - R * R, 0.0)) * v
    if method is Method.VANILLA:
        return StudentState(w=Q * math.sqrt(N) * direction, gamma=1.0)
    return StudentState(w=L * math.sqrt(N) * direction, gamma=Q)


def simulate_online(
    N: int,
    eta: float,
    t_end: float,
    zeta: float = 0.0,
    act=Activation.RELU,
    method=Method.WN_GAMMA_DECAY,
    initial: tuple[float, float, float] = (0.5, 0.3, 1.0),
    seed: int = 0,
    chunk: int = 2048,
    gamma_lr: float | None = None,
) -> Trajectory:
    """Online learning with a fresh example per step and teacher ``g(w*.x)``.

    Time is ``t = j/N``; order parameters are recorded once per unit time.
    The scale parameter moves with rate ``gamma_lr`` (default ``eta/N``) so
    that, like the direction, it changes by O(1) per unit of ``t``.
    Only the single-example rules (vanilla, WN, WN+gamma decay) are defined
    here; a batch of one has no batch statistics.
    """
    act, method = as_activation(act), as_method(method)
    if method is Method.BN:
        raise DomainError("online learning uses the WN+gamma-decay form of BN")
    teacher = make_teacher(N, seed)
    state = student_from_order(*initial, teacher, seed, method)
    cfg = TeacherStudentConfig(N=max(N, 64), M=2, P=2, eta=eta, zeta=zeta, act=act, method=method)
    rng = np.random.default_rng([seed, 5])
    n_steps = int(round(t_end * N))
    times = [0.0]
    states = [order_parameters(state, teacher, method)]
    sqrtN = math.sqrt(N)
    eta_g = eta / N if gamma_lr is None else gamma_lr
    j = 0
    while j < n_steps:
        X = rng.standard_normal((min(chunk, n_steps - j), N)) / sqrtN
        Y = act(X @ teacher)
        for x, yv in zip(X, Y):
            g_w, g_gamma = gradients(state, x[None, :], np.array([yv]), method, act, cfg.zeta)
            state = StudentState(state.w - eta * g_w, state.gamma - eta_g * g_gamma)
            j += 1
            if j % N == 0:
                times.append(j / N)
                states.append(order_parameters(state, teacher, method))
    return Trajectory(np.asarray(times), np.asarray(states))


def with_(cfg: TeacherStudentConfig, **changes) -> TeacherStudentConfig:
    # P is derived from alpha unless given explicitly
    if "alpha" in changes and "P" not in changes:
        changes["P"] = None
    return replace(cfg, **changes)
