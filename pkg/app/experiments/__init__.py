from app.experiments.export import emit_csv, emit_states_csv, write_region_csv
from app.experiments.runner import mass_defect_study, run_grid, run_scenario
from app.experiments.scenarios import fast_scenario, load_scenario, slow_scenario

__all__ = [
    "emit_csv",
    "emit_states_csv",
    "fast_scenario",
    "load_scenario",
    "mass_defect_study",
    "run_grid",
    "run_scenario",
    "slow_scenario",
    "write_region_csv",
]
