from .campaign import SimConfig, SimOutcome, load_config, parse_config, run_campaign, solicitation_curve, solicitation_experiment
from .metrics import acp, rpr, tcp, treasure_contribution
from .network import NetworkParams, generate_network
