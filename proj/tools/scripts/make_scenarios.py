#!/usr/bin/env python3
"""Regenerates the bundled scenario files under scenarios/."""
import json
import math
import pathlib

ROOT = pathlib.Path(__file__).resolve().parents[2] / "scenarios"

CAMERA = {"alpha_deg": 30, "fov_deg": 80, "width": 1280, "height": 720, "baseline": 0.0016,
          "tip_offset": [0.0, 0.0, 0.0]}
SENSOR = {"rate": 9, "delay": 0.34, "pixel_noise": 0.0, "dropout": 0.0, "perception": "pipeline"}
SERVO = {"method": "HYBRID", "lambda": [1.0, 1.0, 1.0], "v_max": 0.02, "hybrid_lo": 0.3, "hybrid_hi": 0.6}
AIT = {"w_d": 0.5, "z_star": 0.08, "zone_a": 0.4, "zone_b": 0.2, "zone_c": 0.4, "depth_target": 0.03,
       "depth_violation": 0.05, "lost_timeout": 10, "instruction": "TRACK_WEIGHTED"}
EKF = {"lambda_s": 0.9, "process_sd": [5e-4, 5e-4, 5e-4, 5e-3, 5e-3, 5e-3], "observation_sd": [1.0, 1.0, 0.3],
       "gap_limit": 1.0}


def r(v):
    return [round(x, 6) for x in v]


def circle(centre, radius, period, duration, phase=0.0, dz=0.0, step=0.25):
    pts = []
    n = int(round(duration / step))
    for k in range(n + 1):
        t = k * step
        a = 2 * math.pi * t / period + phase
        pts.append({"t": round(t, 6), "p": r([centre[0] + radius * math.cos(a), centre[1] + radius * math.sin(a),
                                              centre[2] + dz * math.sin(0.5 * a)])})
    return pts


def write(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def base(name, seed, duration):
    return {"name": name, "seed": seed, "duration": duration, "control_rate": 100, "camera": CAMERA,
            "joints": {"theta1": 0.0, "theta2": 0.0, "l": 0.06}, "sensor": SENSOR, "servo": SERVO, "ait": AIT,
            "ekf": EKF}


def quiescent():
    doc = base("quiescent", 11, 60.0)
    doc["scene"] = {"frame": "camera", "texture_seed": 5, "tissue_depth": 0.25, "instruments": [
        {"side": "LEFT", "pivot": [-0.16, 0.04, 0.02], "radius": 0.0025,
         "waypoints": circle([-0.012, 0.004, 0.080], 0.008, 12.0, 60.0, dz=0.01)},
        {"side": "RIGHT", "pivot": [0.16, 0.03, 0.03], "radius": 0.0025, "jaw_length": 0.009,
         "jaw_opening_deg": 20, "waypoints": circle([0.014, -0.004, 0.085], 0.007, 9.0, 60.0, phase=1.0, dz=0.008)},
    ]}
    write(ROOT / "quiescent.json", doc)


def step_violation():
    doc = base("step_violation", 23, 10.0)
    near = [0.004, 0.0, 0.08]
    far = [0.004, 0.0, 0.17]
    doc["scene"] = {"frame": "camera", "texture_seed": 9, "tissue_depth": 0.35, "instruments": [
        {"side": "RIGHT", "pivot": [0.17, 0.02, 0.03], "radius": 0.0025,
         "waypoints": [{"t": 0.0, "p": near}, {"t": 2.0, "p": near}, {"t": 2.01, "p": far}, {"t": 10.0, "p": far}]},
    ]}
    write(ROOT / "step_violation.json", doc)


def servo_laws():
    # Static target seen from a side entry; ideal perception at the control rate.
    for method in ["IBVS", "IBVS_DC", "IBVS3D", "PBVS", "HYBRID"]:
        doc = base("servo_laws_" + method.lower(), 3, 10.0)
        doc["camera"] = {"alpha_deg": 30, "fov_deg": 120, "width": 960, "height": 540, "baseline": 0.0016,
                         "tip_offset": [0.001, -0.002, 0.004]}
        doc["joints"] = {"theta1": 0.25, "theta2": -0.15, "l": 0.06}
        doc["sensor"] = {"rate": 100, "delay": 0.0, "pixel_noise": 0.0, "dropout": 0.0, "perception": "truth"}
        doc["servo"] = dict(SERVO, method=method, v_max=1.0)
        doc["ekf"] = dict(EKF, process_sd=[1e-5, 1e-5, 1e-5, 1e-4, 1e-4, 1e-4], observation_sd=[0.01, 0.01, 0.01])
        doc["scene"] = {"frame": "camera", "instruments": [
            {"side": "RIGHT", "pivot": [0.25, 0.05, 0.05], "waypoints": [{"t": 0.0, "p": [0.12, 0.01, 0.16]}, {"t": 10.0, "p": [0.12, 0.01, 0.16]}]}]}
        write(ROOT / "servo_laws" / (method.lower() + ".json"), doc)


def bridge_demo():
    # Interactive session for the steering bridge: tips hold still until dragged.
    doc = base("bridge_demo", 5, 3600.0)
    doc["sensor"] = dict(SENSOR, perception="truth")
    doc["scene"] = {"frame": "camera", "texture_seed": 3, "tissue_depth": 0.25, "instruments": [
        {"side": "LEFT", "pivot": [-0.16, 0.04, 0.02], "radius": 0.0025,
         "waypoints": [{"t": 0.0, "p": [-0.010, 0.004, 0.080]}]},
        {"side": "RIGHT", "pivot": [0.16, 0.03, 0.03], "radius": 0.0025, "jaw_length": 0.009,
         "jaw_opening_deg": 20, "waypoints": [{"t": 0.0, "p": [0.012, -0.004, 0.080]}]},
    ]}
    write(ROOT / "interactive" / "bridge_demo.json", doc)


if __name__ == "__main__":
    bridge_demo()
    quiescent()
    step_violation()
    servo_laws()
