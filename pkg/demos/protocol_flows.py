"""Walk through enrolment, identification and a gated message exchange."""

from amsobe.protocol import demo_scenario, gating_violations, privacy_violations

for scenario, impostor in (("register", False), ("identify", False), ("exchange", False), ("exchange", True)):
    run = demo_scenario(scenario, seed=4, n=64, impostor=impostor)
    print(f"== {scenario}{' (impostor)' if impostor else ''}")
    print(run.transcripts[-1].format_table())
    leaks = privacy_violations(run.channel.wire, run.templates, [run.key])
    gates = [v for ts in run.transcripts for v in gating_violations(ts)]
    print(f"wire messages: {len(run.channel.wire)}, leaks: {len(leaks)}, gating violations: {len(gates)}\n")
