"""
Closed-form reference scenarios.
"""

from triplewave.scenarios.catalog import (
    SCENARIO_IDS,
    Scenario,
    closed_form_distance,
    list_scenarios,
    make_scenario,
)

__all__ = ["SCENARIO_IDS", "Scenario", "closed_form_distance", "list_scenarios", "make_scenario"]
