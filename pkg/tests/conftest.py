"""Shared scenario builders and the acceptance-summary hook."""

from __future__ import annotations

from iriscc.scenario import FlowSpec, LinkConfig, Scenario
from iriscc.units import mbps_to_pkts_per_ms

# One line per acceptance criterion; echoed as a terminal section so the
# verdicts are visible in normal pytest output.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_link(mbps: float = 20.0, prop: float = 25.0, queue: int = 104,
              loss: float = 0.0, seed: int = 1,
              sched: tuple | None = None) -> LinkConfig:
    """Bottleneck shorthand; ``sched`` overrides the flat bandwidth."""
    if sched is None:
        sched = ((0.0, mbps_to_pkts_per_ms(mbps)),)
    return LinkConfig(bandwidth_schedule=sched, prop_delay=prop,
                      queue_capacity=queue, random_loss=loss, seed=seed)


def flow(controller: str = "iris", start: float = 0.0,
         prop: float | None = None, **params) -> FlowSpec:
    return FlowSpec(controller=controller, start_time=start,
                    prop_delay=prop, params=params)


def scenario(link: LinkConfig, flows: tuple[FlowSpec, ...],
             duration: float) -> Scenario:
    return Scenario(link=link, flows=flows, duration=duration)
