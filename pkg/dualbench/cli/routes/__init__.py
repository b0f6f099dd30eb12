"""
CLI route handlers
One handler per experiment: handler(ctx, report)
"""
from dualbench.cli.routes import (
    check_algebra, check_duality, check_stationary, limits, mc_duality, profile, simulate,
)

ROUTES = {
    "check-algebra": check_algebra.run,
    "check-duality": check_duality.run,
    "check-stationary": check_stationary.run,
    "simulate": simulate.run,
    "mc-duality": mc_duality.run,
    "profile": profile.run,
    "limits": limits.run,
}
