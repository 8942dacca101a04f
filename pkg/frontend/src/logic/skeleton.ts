/** 25-joint body model: bone adjacency and the front-view 2-D projection. */

export type Joint3 = [number, number, number];

export const JOINT_NAMES = [
  "Nose", "Neck", "RShoulder", "RElbow", "RWrist",
  "LShoulder", "LElbow", "LWrist", "MidHip", "RHip",
  "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle",
  "REye", "LEye", "REar", "LEar", "LBigToe",
  "LSmallToe", "LHeel", "RBigToe", "RSmallToe", "RHeel",
] as const;

/** Bone segments as joint index pairs. */
export const BONES: ReadonlyArray<readonly [number, number]> = [
  [1, 0], [1, 2], [2, 3], [3, 4], [1, 5], [5, 6], [6, 7],
  [1, 8], [8, 9], [9, 10], [10, 11], [8, 12], [12, 13], [13, 14],
  [0, 15], [15, 17], [0, 16], [16, 18],
  [14, 19], [19, 20], [14, 21], [11, 22], [22, 23], [11, 24],
];

export interface Viewport {
  width: number;
  height: number;
  margin: number;
}

export interface Projected {
  x: number;
  y: number;
}

/**
 * Front-view orthographic projection (drop z), fitted to the viewport and
 * flipped so +y (up in world space) points up on the canvas.
 */
export function projectFrontView(joints: Joint3[], view: Viewport): Projected[] {
  const xs = joints.map((j) => j[0]);
  const ys = joints.map((j) => j[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const scale = Math.min(
    (view.width - 2 * view.margin) / spanX,
    (view.height - 2 * view.margin) / spanY,
  );
  const offsetX = (view.width - scale * spanX) / 2;
  const offsetY = (view.height - scale * spanY) / 2;
  return joints.map(([x, y]) => ({
    x: offsetX + (x - minX) * scale,
    y: view.height - (offsetY + (y - minY) * scale),
  }));
}
