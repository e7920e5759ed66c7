"""Standard desk-scale scenes used by the acceptance suite, ``selftest`` and ``bench``.

Each factory returns a ``SceneScript``. Scene timing is chosen against the
default tracker constants: nothing can be acquired before the two-second
initialization delay has elapsed, and a still object is dropped after two
seconds of low movement.
"""

from __future__ import annotations

from raytrack.scenes import SceneScript


def bouncing_path(start: int, frames: int, x: float, y: float, vx: float, vy: float,
                  size: float, margin: float) -> list[tuple[int, float, float, float]]:
    """Per-frame keyframes of a constant-speed object bouncing off the 160x120 borders."""
    lo_x, hi_x = margin, 159 - margin
    lo_y, hi_y = margin, 119 - margin
    rows = [(start, x, y, size)]
    for f in range(start + 1, start + frames):
        x, y = x + vx, y + vy
        if not lo_x <= x <= hi_x:
            vx = -vx
            x = min(max(x, lo_x), hi_x)
        if not lo_y <= y <= hi_y:
            vy = -vy
            y = min(max(y, lo_y), hi_y)
        rows.append((f, x, y, size))
    return rows


# disk translation: motion starts on this frame
TRANSLATION_ONSET = 71


def disk_translation(seed: int = 3) -> SceneScript:
    """Dark disk of radius 30, still for ~2.3 s, then 3 px/frame for 200 frames."""
    path = [(0, 40.0, 60.0, 30.0)]
    path += bouncing_path(TRANSLATION_ONSET - 1, 201, 40.0, 60.0, 3.0, 0.0, 30.0, 31.0)
    return SceneScript(duration=TRANSLATION_ONSET + 200, fps=30, path=tuple(path),
                       background=("uniform", (245, 245, 245)), color=(10, 10, 10),
                       noise=2, seed=seed)


JUMP_FRAME = 50


def brightness_jump(seed: int = 4) -> SceneScript:
    """Static disk; every pixel brightens by 40 from frame 50 on."""
    return SceneScript(duration=70, fps=10, path=((0, 80.0, 60.0, 25.0),),
                       background=("uniform", (150, 150, 150)), color=(40, 40, 40),
                       noise=2, seed=seed, brightness_jump=(JUMP_FRAME, 40))


TELEPORT_FRAME = 74


def teleport_bar(seed: int = 1) -> SceneScript:
    """A 80x16 bar slides down at 5 px/frame, then skips 12 px in one frame.

    The skip is larger than the bar's half height, so last frame's inner
    point falls outside the bar.
    """
    path = [(0, 80.0, 20.0, 80.0), (64, 80.0, 20.0, 80.0)]
    y = 20.0
    for f in range(65, TELEPORT_FRAME):
        y += 5.0
        path.append((f, 80.0, y, 80.0))
    y += 12.0
    path.append((TELEPORT_FRAME, 80.0, y, 80.0))
    for f in range(TELEPORT_FRAME + 1, TELEPORT_FRAME + 6):
        y += 5.0
        path.append((f, 80.0, y, 80.0))
    return SceneScript(duration=TELEPORT_FRAME + 6, fps=30, path=tuple(path), shape="square",
                       aspect=0.2, color=(10, 10, 10),
                       background=("checker", 40.0, (230, 230, 230), (120, 120, 120)),
                       noise=2, seed=seed)


# growing disk: a short sideways move at GROWTH_START - 4 lets the tracker
# acquire, then the radius grows 20 -> 40 over 100 frames and holds
GROWTH_START = 209
GROWTH_FRAMES = 100
HOLD_FRAMES = 75


def growing_disk(seed: int = 5) -> SceneScript:
    """Disk radius grows linearly from 20 to 40 while its center stays put.

    Growth alone barely registers in the compensated difference image, so the
    scene runs at 100 fps: the two-second idle rule then spans 200 frames and
    the whole growth-and-hold phase fits inside it.
    """
    a = GROWTH_START - 4
    end = GROWTH_START + GROWTH_FRAMES
    path = ((0, 40.0, 60.0, 20.0), (a, 40.0, 60.0, 20.0), (GROWTH_START, 64.0, 60.0, 20.0),
            (end, 64.0, 60.0, 40.0))
    return SceneScript(duration=end + HOLD_FRAMES, fps=100, path=path,
                       background=("uniform", (245, 245, 245)), color=(10, 10, 10),
                       noise=2, seed=seed)


def hand_on_clutter(seed: int = 6) -> SceneScript:
    """Hand silhouette drifting diagonally over a checker background."""
    path = [(0, 60.0, 60.0, 0.9)]
    path += bouncing_path(65, 120, 60.0, 60.0, 4.0, 2.0, 0.9, 42.0)
    return SceneScript(duration=185, fps=30, path=tuple(path), shape="hand",
                       color=(70, 45, 35),
                       background=("checker", 20.0, (235, 235, 235), (205, 205, 205)),
                       noise=3, seed=seed)


def low_light_blur(seed: int = 7) -> SceneScript:
    """10 fps, heavy noise and horizontal motion blur on a fast disk."""
    path = [(0, 40.0, 60.0, 28.0)]
    path += bouncing_path(20, 60, 40.0, 60.0, 6.0, 2.0, 28.0, 29.0)
    return SceneScript(duration=80, fps=10, path=tuple(path), noise=8, motion_blur=5,
                       background=("uniform", (235, 235, 235)), color=(15, 15, 15),
                       seed=seed)


def occluded_disk(seed: int = 8) -> SceneScript:
    """Disk passing behind a vertical post."""
    from raytrack.scenes import Occlusion

    path = [(0, 35.0, 60.0, 28.0)]
    path += bouncing_path(61, 90, 35.0, 60.0, 4.0, 0.0, 28.0, 29.0)
    return SceneScript(duration=151, fps=30, path=tuple(path), noise=2, seed=seed,
                       background=("uniform", (245, 245, 245)), color=(10, 10, 10),
                       occlusions=(Occlusion(95, 0, 103, 120),))


SUITE = {
    "disk-translation": disk_translation,
    "brightness-jump": brightness_jump,
    "teleport-bar": teleport_bar,
    "growing-disk": growing_disk,
    "hand-clutter": hand_on_clutter,
    "low-light-blur": low_light_blur,
    "occluded-disk": occluded_disk,
}
