from typing import List, Optional

from pydantic import BaseModel

from services.flow import TraceConfig


class TraceOptions(BaseModel):
    step: Optional[float] = None
    budget: Optional[float] = None
    sing_radius: Optional[float] = None
    close_tol: Optional[float] = None

    def config(self) -> TraceConfig:
        return TraceConfig.from_settings(
            step=self.step,
            length_budget=self.budget,
            sing_radius=self.sing_radius,
            close_tol=self.close_tol,
        )


class AnalyzeRequest(BaseModel):
    spec: str
    options: TraceOptions = TraceOptions()


class TraceRequest(BaseModel):
    spec: str
    at: Optional[str] = None
    direction: Optional[str] = None
    vertex: Optional[str] = None
    slot: int = 0
    include_points: bool = False
    options: TraceOptions = TraceOptions()


class HyperRequest(BaseModel):
    r: float
    extra: List[str] = []
    options: TraceOptions = TraceOptions()


class EllipticRequest(BaseModel):
    points: List[str]
    c_prime: str
    q_bound: Optional[int] = None


class CoverRequest(BaseModel):
    r: float
    periods: bool = True
    options: TraceOptions = TraceOptions()


class PreimageRequest(BaseModel):
    n: int
    on_critical: bool = False
