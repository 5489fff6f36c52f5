import re
from contextlib import contextmanager
from itertools import combinations
from typing import Pattern, Union

import numpy as np
from scipy.optimize import linprog

from tailflation.qr_solver import check_loss
from tailflation.timeseries import Frame, Period, QuarterlySeries


@contextmanager
def assert_logs(caplog, level, pattern: Union[Pattern[str], str]):
    pattern = re.compile(pattern)
    caplog.clear()
    with caplog.at_level(level):
        yield
        assert any(pattern.fullmatch(record.msg) for record in caplog.records)


@contextmanager
def assert_no_logs(caplog, level):
    caplog.clear()
    with caplog.at_level(level):
        yield
        assert not caplog.records


def brute_force_objective(x, y, tau) -> float:
    """
    The smallest pinball loss over every coefficient vector that interpolates p rows exactly
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    best = np.inf
    for rows in combinations(range(n), p):
        sub = x[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        beta = np.linalg.solve(sub, y[list(rows)])
        best = min(best, check_loss(y - x @ beta, tau))
    return best


def mid_ranks(x) -> np.ndarray:
    x = np.asarray(x)
    return np.array([1 + np.sum(x < v) + (np.sum(x == v) - 1) / 2 for v in x])


def spearman_oracle(x, y) -> float:
    rx, ry = mid_ranks(x), mid_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))


def kendall_oracle(x, y) -> float:
    n = len(x)
    concordant = discordant = tied_x = tied_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = np.sign(x[i] - x[j])
            dy = np.sign(y[i] - y[j])
            if dx == 0:
                tied_x += 1
            if dy == 0:
                tied_y += 1
            if dx * dy > 0:
                concordant += 1
            elif dx * dy < 0:
                discordant += 1
    pairs = n * (n - 1) // 2
    return (concordant - discordant) / np.sqrt((pairs - tied_x) * (pairs - tied_y))


def dense_hp_trend(y, lambda_) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    n = len(y)
    d = np.zeros((n - 2, n))
    for i in range(n - 2):
        d[i, i:i + 3] = (1, -2, 1)
    return np.linalg.solve(np.eye(n) + lambda_ * d.T @ d, y)


def primal_objective(x, y, tau) -> float:
    """
    The optimal loss from the primal linear program, min tau 1'u + (1 - tau) 1'v subject to X b + u - v = y
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    cost = np.concatenate((np.zeros(p), np.full(n, tau), np.full(n, 1 - tau)))
    a_eq = np.hstack((x, np.eye(n), -np.eye(n)))
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    result = linprog(cost, A_eq=a_eq, b_eq=y, bounds=bounds, method='highs')
    assert result.status == 0, result.message
    return float(result.fun)


def sparse_frame(seed, n=500) -> Frame:
    """
    y = 1 + 2 c0 - 1.5 c3 + c6 + noise over eight standard normal candidates c0..c7. The noise is contaminated
    normal: a sharp density at the median with occasional large errors.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 8))
    noise = np.where(rng.random(n) < 0.9, rng.normal(scale=0.01, size=n), rng.normal(scale=10.0, size=n))
    y = 1 + 2 * x[:, 0] - 1.5 * x[:, 3] + x[:, 6] + noise
    series = {'y': y, **{f'c{i}': x[:, i] for i in range(8)}}
    return Frame({name: QuarterlySeries(Period(1990, 1), values) for name, values in series.items()})
