# %% [markdown]
# The dual-heater twin and why a single finite-difference step is a poor
# predictor.
#
# Each heater obeys m*Cp*dT/dt = q - U*A*(T - Ta) - eps*sigma*A*(T^4 - Ta^4).
# The twin integrates this with RK4; the naive predictor takes one Euler
# step across the whole horizon.

# %%
import numpy as np

from agentic_control import (
    DisturbanceProfile, HeaterCommand, TwinParams, TwinState, equilibrium_temperature,
    naive_single_step, net_heat_rate, simulate_interval,
)

p = TwinParams()
print(f"thermal mass {p.thermal_mass} J/K, ambient {p.ambient} K")
print(f"net heat at 305.6 K, no power: {net_heat_rate(305.6, 0.0):+.4f} W")
print(f"net heat at 305.6 K, 0.3 W:    {net_heat_rate(305.6, 0.3):+.4f} W")

# %%
# steady temperatures at full power, with and without the fan
for label, u in [("still air", p.htc), ("fan", 1.5 * p.htc)]:
    print(f"{label:9s} T* = {equilibrium_temperature(0.3, p, u):.3f} K")

# %%
# prediction error grows with the horizon
start = TwinState(305.68, 305.68)
cmd = HeaterCommand(0.3, 0.3)
print(" h (s)   RK4 (K)    naive (K)   delta (K)")
for h in (3, 6, 9, 12, 15, 18, 21, 24, 27, 30):
    truth = simulate_interval(start, cmd, h).final_state.t1
    naive = naive_single_step(start, cmd, h)[0]
    print(f"{h:5d}  {truth:9.4f}  {naive:9.4f}  {abs(naive - truth):9.4f}")

# %%
# the errors grow faster once the heater is far from balance, e.g. cooling
# from a hot start with the power cut
hot = TwinState(340.0, 340.0)
off = HeaterCommand(0.0, 0.0)
deltas = [abs(naive_single_step(hot, off, h)[0] - simulate_interval(hot, off, h).final_state.t1)
          for h in range(3, 31, 3)]
print(np.round(deltas, 3))

# %%
# fan on heater 1: its temperature sags relative to heater 2
traj = simulate_interval(TwinState(306.15, 306.15), HeaterCommand(0.2, 0.2), 300,
                         disturbance=DisturbanceProfile(fan_on_heater=1))
print(f"after 300 s: T1 = {traj.final_state.t1:.3f} K, T2 = {traj.final_state.t2:.3f} K")
