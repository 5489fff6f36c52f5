import numpy as np
from pytest import fixture

from tailflation import qr_solver


@fixture(autouse=True)
def certified_fits(monkeypatch):
    """
    Every quantile regression fit computed by a test must carry an optimality certificate
    """
    fit = qr_solver.fit

    def checked_fit(design, tau):
        result = fit(design, tau)
        certificate = qr_solver.check_optimality(design.x, design.y, result)
        assert certificate.optimal, f'fit at tau={tau} violates optimality by {certificate.violation}'
        if design.intercept:
            residuals = result.residuals
            assert np.mean(residuals < 0) <= tau + 1e-12
            assert tau <= np.mean(residuals <= 0) + 1e-12
        return result

    monkeypatch.setattr(qr_solver, 'fit', checked_fit)
    yield
