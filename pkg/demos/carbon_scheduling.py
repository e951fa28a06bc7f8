"""Forecast-guided workload scheduling on the bundled solar scenario.

Runs the rolling-horizon scheduler with point forecasts, DSCP intervals and
perfect foresight, then sweeps the risk attitude for the DSCP forecaster.
"""

from dscp.carbon import Forecaster, RiskPolicy, bundled_scenario, simulate

N = 11


def main():
    scenario = bundled_scenario()
    history = 2 * len(scenario) // 3
    print(f"{len(scenario)} hourly steps, scheduling the last {len(scenario) - history}")
    forecasters = {kind: Forecaster(kind, scenario, history, N + 1) for kind in ("none_cp", "dscp", "perfect")}
    for kind, fc in forecasters.items():
        r = simulate(scenario, fc, RiskPolicy(0.25), n=N, start=history)
        print(f"{kind:8s} emissions {r.emissions:7.1f} kg  brown {r.brown_kwh:8.1f} kWh  "
              f"settled backlog {r.settled_kwh:6.1f} kWh")

    print("\nrisk attitude sweep (dscp)")
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        r = simulate(scenario, forecasters["dscp"], RiskPolicy(lam), n=N, start=history)
        print(f"lambda {lam:.2f}  emissions {r.emissions:7.1f} kg  brown per step {r.brown_kwh / len(r.log):6.2f} kWh")


if __name__ == "__main__":
    main()
