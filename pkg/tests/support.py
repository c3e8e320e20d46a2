import sys
from pathlib import Path

from mcpvet.protocol import ServerLaunchSpec

SERVERS_DIR = Path(__file__).parent / "servers"


def server_spec(script: str, name: str = "") -> ServerLaunchSpec:
    return ServerLaunchSpec(
        command=sys.executable,
        args=[str(SERVERS_DIR / script)],
        name=name or script.removesuffix(".py"),
        workdir=str(SERVERS_DIR),
    )
