from app.scheme.grid import node_positions, periodic_laplacian, second_difference
from app.scheme.initial_data import barenblatt_init
from app.scheme.solver import simulate, step, u_state, v_state

__all__ = [
    "barenblatt_init",
    "node_positions",
    "periodic_laplacian",
    "second_difference",
    "simulate",
    "step",
    "u_state",
    "v_state",
]
