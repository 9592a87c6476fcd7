// Stable id -> color mapping (golden-angle hue walk) so a track keeps its
// color across frames, runs and the comparison ghost.

export function idColor(id: number): [number, number, number] {
  const hue = ((id * 137.50776) % 360) / 360;
  return hslToRgb(hue, 0.72, 0.55);
}

export function cssColor(id: number): string {
  const [r, g, b] = idColor(id);
  return `rgb(${Math.round(r * 255)}, ${Math.round(g * 255)}, ${Math.round(b * 255)})`;
}

function hslToRgb(h: number, s: number, l: number): [number, number, number] {
  const q = l < 0.5 ? l * (1 + s) : l + s - l * s;
  const p = 2 * l - q;
  const f = (t: number) => {
    t = ((t % 1) + 1) % 1;
    if (t < 1 / 6) return p + (q - p) * 6 * t;
    if (t < 1 / 2) return q;
    if (t < 2 / 3) return p + (q - p) * (2 / 3 - t) * 6;
    return p;
  };
  return [f(h + 1 / 3), f(h), f(h - 1 / 3)];
}
