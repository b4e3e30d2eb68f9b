"""
Configuration for the Berarducci Tree Engine
One immutable, validated settings object shared by the command line, the
trace files and every report that echoes its configuration
"""

from typing import Dict, Literal

from pydantic import BaseModel, ConfigDict, Field

from meaningless import Oracle, OracleKind
from reduction import Policy


class EngineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    fuel: int = Field(default=200, ge=1, description="Weak head steps per question")
    depth: int = Field(default=16, ge=0, description="Observation depth of trees and checks")
    seed: int = Field(default=0xC0FFEE, ge=0, lt=2 ** 64, description="Seed of every random draw")
    oracle: Literal["root-active", "head-ogre", "bot-only"] = Field(default="root-active")
    policy: Literal["assume", "strict"] = Field(default="assume", description="Reading of Unknown verdicts")
    output: Literal["text", "json"] = Field(default="text")
    strict: bool = Field(default=False, description="Treat results resting on assumptions as failures")
    snapshot_depth: int = Field(default=8, ge=0, description="Truncation depth of trace snapshots")
    redex_depth: int = Field(default=8, ge=1, description="Depth bound of the redex search of strategies")

    def make_oracle(self) -> Oracle:
        policy = Policy(self.policy)
        kind = OracleKind(self.oracle)
        if kind is OracleKind.BOT_ONLY:
            return Oracle.bot_only(policy)
        return Oracle(kind, self.fuel, policy)

    def echo(self) -> Dict[str, object]:
        """The configuration as echoed into reports and trace headers"""
        return self.model_dump()
