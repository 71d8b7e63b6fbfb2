"""Generate the small synthetic dataset used by pipeline tests.

Layout under the output root:
  images/<frame>.png      road-scene-like frames with one or two panels
  labels/<frame>.txt      YOLO boxes, one line per manifest row of the frame
  manifest.csv            frame,billboard_id,driver_id,gaze_class,split
  split.csv               billboard_id,split
  detections.csv          jittered boxes standing in for detector output

The gaze class follows a rule over panel position and width, so box
features alone carry signal even with the stub embedder.
"""

import argparse
import csv
import pathlib

import cv2
import numpy as np

W, H = 160, 96
N_BILLBOARDS = 20
N_TEST = 5
DRIVERS = ["d1", "d2", "d3"]
FRAMES_PER_PAIR = 3


def gaze_rule(cx, w):
    if w > 0.28:
        return 2
    if cx > 0.5 and w > 0.16:
        return 1
    return 0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    root = args.out
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)

    ids = [f"bb{i:02d}" for i in range(N_BILLBOARDS)]
    test_ids = set(ids[-N_TEST:])
    base = {}
    for b in ids:
        base[b] = dict(
            cx=rng.uniform(0.2, 0.8),
            cy=rng.uniform(0.25, 0.6),
            w=rng.uniform(0.08, 0.40),
            aspect=rng.uniform(0.45, 0.7),
            color=tuple(int(c) for c in rng.integers(40, 230, 3)),
        )

    manifest, det_rows = [], []
    frame_no = 0
    for b in ids:
        for d in DRIVERS:
            for _ in range(FRAMES_PER_PAIR):
                frame = f"f{frame_no:04d}.png"
                frame_no += 1
                panels = [b]
                if rng.uniform() < 0.25:
                    other = ids[int(rng.integers(0, N_BILLBOARDS))]
                    if other != b and (other in test_ids) == (b in test_ids):
                        panels.append(other)

                img = np.zeros((H, W, 3), np.uint8)
                sky = np.linspace(200, 120, H).astype(np.uint8)[:, None]
                img[:, :, 0] = sky
                img[:, :, 1] = sky
                img[:, :, 2] = np.clip(sky.astype(int) + 30, 0, 255).astype(np.uint8)
                img[int(H * 0.7):, :, :] = (90, 90, 90)
                img = np.clip(img.astype(int) + rng.integers(-12, 13, img.shape), 0, 255).astype(np.uint8)

                labels, dets = [], []
                for p in panels:
                    g = base[p]
                    scale = rng.uniform(0.9, 1.1)
                    w = min(0.45, g["w"] * scale)
                    h = w * g["aspect"] * W / H
                    cx = float(np.clip(g["cx"] + rng.uniform(-0.03, 0.03), w / 2, 1 - w / 2))
                    cy = float(np.clip(g["cy"] + rng.uniform(-0.03, 0.03), h / 2, 1 - h / 2))
                    x1, y1 = (cx - w / 2) * W, (cy - h / 2) * H
                    x2, y2 = (cx + w / 2) * W, (cy + h / 2) * H
                    cv2.rectangle(img, (int(x1), int(y1)), (int(x2), int(y2)), g["color"][::-1], -1)
                    cv2.rectangle(img, (int(x1), int(y1)), (int(x2), int(y2)), (20, 20, 20), 1)
                    labels.append(f"0 {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}")
                    cls = gaze_rule(g["cx"], g["w"])
                    if rng.uniform() < 0.1:
                        cls = int(rng.integers(0, 3))
                    split = "test" if p in test_ids else "train"
                    manifest.append((frame, p, d, cls, split))
                    jit = rng.uniform(-0.03, 0.03, 4) * np.array([w * W, h * H, w * W, h * H])
                    box = np.array([x1, y1, x2, y2]) + jit
                    box = np.clip(box, 0, [W, H, W, H])
                    dets.append((float(rng.uniform(0.5, 0.99)), box))
                if rng.uniform() < 0.3:
                    fx, fy = rng.uniform(0, W - 20), rng.uniform(0, H - 12)
                    dets.append((float(rng.uniform(0.26, 0.5)), np.array([fx, fy, fx + 18, fy + 10])))
                dets.sort(key=lambda t: -t[0])
                for i, (s, bx) in enumerate(dets):
                    det_rows.append((frame, i, *[f"{v:.6f}" for v in bx], f"{s:.6f}"))

                cv2.imwrite(str(root / "images" / frame), img)
                (root / "labels" / frame.replace(".png", ".txt")).write_text(
                    "".join(line + "\n" for line in labels))

    with open(root / "manifest.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["frame", "billboard_id", "driver_id", "gaze_class", "split"])
        w.writerows(manifest)
    with open(root / "split.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["billboard_id", "split"])
        for b in ids:
            w.writerow([b, "test" if b in test_ids else "train"])
    with open(root / "detections.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["image", "det_id", "x1", "y1", "x2", "y2", "score"])
        w.writerows(det_rows)


if __name__ == "__main__":
    main()
