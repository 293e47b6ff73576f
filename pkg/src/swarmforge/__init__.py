"""Compile natural-language task descriptions into verified agent swarms.

Construction turns a task description into a dependency DAG of agent
specifications, grounds them with retrieved context, compiles each spec
into a runnable agent configuration, and verifies the result before it
may execute. Execution dispatches the DAG under continuous output
gating, attributes failures as local, upstream, or structural, and
recovers with a cost that scales with the locality of the error.
"""

__version__ = "0.1.0"
