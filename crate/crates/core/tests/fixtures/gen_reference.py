"""Regenerates reference_trajectories.json from gymnasium's noise-free
CartPole-v1 and Acrobot-v1 dynamics. Internal float64 state is recorded."""
import json
import gymnasium as gym
import numpy as np

out = {}

cp = gym.make("CartPole-v1").unwrapped
cp.reset(seed=0)
cp.state = np.array([0.01, -0.02, 0.03, 0.04], dtype=np.float64)  # x, v, theta, omega
actions = [int(i % 3 == 0) for i in range(40)]
states = [cp.state.tolist()]
for a in actions:
    cp.step(a)
    states.append(np.asarray(cp.state, dtype=np.float64).tolist())
out["cartpole"] = {"order": ["x", "v", "theta", "omega"], "actions": actions, "states": states}

ab = gym.make("Acrobot-v1").unwrapped
ab.reset(seed=0)
ab.state = np.array([0.05, -0.08, 0.02, 0.07], dtype=np.float64)  # theta1, theta2, dtheta1, dtheta2
actions = [(i * 7) % 3 for i in range(60)]
states = [ab.state.tolist()]
for a in actions:
    ab.step(a)
    states.append(np.asarray(ab.state, dtype=np.float64).tolist())
out["acrobot"] = {"order": ["theta1", "theta2", "dtheta1", "dtheta2"], "actions": actions, "states": states}

with open("reference_trajectories.json", "w") as f:
    json.dump(out, f, indent=1)
