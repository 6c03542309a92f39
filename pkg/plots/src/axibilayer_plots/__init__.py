"""Figure scripts for the axisymmetric membrane solver's output files."""

from dataclasses import dataclass, field

__version__ = "0.1.0"

KINDS = ("cross_section", "energy", "convergence", "render3d")


@dataclass
class PlotSpec:
    """One figure request: input path(s), output path and plot kind."""

    kind: str
    inputs: tuple
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind '{self.kind}'")
        if isinstance(self.inputs, str):
            self.inputs = (self.inputs,)


def render(spec: PlotSpec):
    """Dispatch a PlotSpec to the matching script implementation."""
    if spec.kind == "cross_section":
        from .cross_section import render as impl

        return impl(spec.inputs[0], spec.output)
    if spec.kind == "energy":
        from .energy_plot import render as impl

        return impl(spec.inputs[0], spec.output)
    if spec.kind == "convergence":
        from .convergence_table import render as impl

        md = impl(spec.inputs[0])
        with open(spec.output, "w") as f:
            f.write(md)
        return md
    from .render3d import render as impl

    return impl(spec.inputs[0], spec.output, **spec.style)
