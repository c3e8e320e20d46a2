"""Scanner for malicious MCP servers plus influence-path fixture generation.

The package has two halves: detection (protocol client, config analysis,
intent inspection, simulated host, tracing, slicing, step-wise judging)
and generation (canonical influence-path enumeration and fixture emission
used as the scanner's test corpus).
"""

__version__ = "0.1.0"
