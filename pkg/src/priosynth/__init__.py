"""Priority-function synthesis for resource-constrained DAG list scheduling.

The package is organized around a small pipeline:

- :mod:`priosynth.graph` loads and analyzes operation DAGs,
- :mod:`priosynth.dsl` is the linear priority-expression language,
- :mod:`priosynth.scheduler` runs list scheduling and an exact oracle,
- :mod:`priosynth.embedding` embeds graphs and retrieves similar kernels,
- :mod:`priosynth.kernels` mines structural motifs into a kernel library,
- :mod:`priosynth.loop` is the iterative synthesis loop with ablations,
- :mod:`priosynth.bench` generates seeded workloads and runs campaigns,
- :mod:`priosynth.cli` wires everything into one command line tool.
"""

__version__ = "0.1.0"

from .graph import Dag, GraphFormatError, NodeRecord, load_dag, load_dag_file
from .dsl import ExprError, PriorityExpr, eval_expr, parse_expr, print_expr
from .scheduler import Schedule, baseline_expr_text, list_schedule, optimal_makespan, verify_schedule

__all__ = [
    "__version__",
    "Dag",
    "NodeRecord",
    "GraphFormatError",
    "load_dag",
    "load_dag_file",
    "PriorityExpr",
    "ExprError",
    "parse_expr",
    "print_expr",
    "eval_expr",
    "Schedule",
    "list_schedule",
    "verify_schedule",
    "baseline_expr_text",
    "optimal_makespan",
]
