"""File formats, configuration, reports, simulation and the command line."""

from .config import Config, config_from_dict, config_to_dict, load_config
from .io import (
    InputError,
    parse_accounts,
    parse_allocations,
    parse_blotter,
    write_accounts,
    write_allocations,
    write_blotter,
)
from .report import (
    METHODS,
    ComparisonReport,
    MethodRow,
    RunReport,
    compare,
    emit_report,
    load_report,
    run_method,
    run_report,
)
from .simulate import SimReport, SimSpec, generate_scenario, load_spec, simulate
