// Cell-grid heatmaps for electrode patterns and raw tactile frames.
// Intensity 0 renders as the background color, 1 as full saturation,
// linearly in between; the pad's long axis runs vertically. Cell values
// are mirrored into data attributes so they stay machine-inspectable.

import { Grid } from "./protocol.js";

export interface HeatmapOptions {
  vmax: number; // value mapping to full saturation
  label: string;
}

const BACKGROUND = [16, 24, 38]; // page panel color
const FULL = [255, 96, 64]; // saturated stimulation

export function cellColor(value: number, vmax: number): string {
  const a = Math.min(Math.max(value / vmax, 0), 1);
  const mix = BACKGROUND.map((b, i) => Math.round(b + (FULL[i] - b) * a));
  return `rgb(${mix[0]}, ${mix[1]}, ${mix[2]})`;
}

export class HeatmapView {
  readonly root: HTMLElement;
  private cells: HTMLElement[][] = [];
  private rows = 0;
  private cols = 0;

  constructor(root: HTMLElement, private options: HeatmapOptions) {
    this.root = root;
    root.classList.add("heatmap");
  }

  private rebuild(rows: number, cols: number): void {
    this.root.textContent = "";
    this.cells = [];
    this.rows = rows;
    this.cols = cols;
    this.root.style.gridTemplateColumns = `repeat(${cols}, 1fr)`;
    for (let r = 0; r < rows; r++) {
      const rowCells: HTMLElement[] = [];
      for (let c = 0; c < cols; c++) {
        const cell = document.createElement("div");
        cell.className = "heatmap-cell";
        cell.dataset.row = String(r);
        cell.dataset.col = String(c);
        this.root.appendChild(cell);
        rowCells.push(cell);
      }
      this.cells.push(rowCells);
    }
  }

  render(grid: Grid): void {
    if (grid.length !== this.rows || (grid[0] ?? []).length !== this.cols) {
      this.rebuild(grid.length, grid[0]?.length ?? 0);
    }
    for (let r = 0; r < this.rows; r++) {
      for (let c = 0; c < this.cols; c++) {
        const value = grid[r][c];
        const cell = this.cells[r][c];
        cell.style.backgroundColor = cellColor(value, this.options.vmax);
        cell.dataset.value = String(value);
        cell.title = `${this.options.label} [${r},${c}] = ${value.toFixed(3)}`;
      }
    }
  }

  // Rendered values, exactly as displayed; tests compare these against the
  // gateway's last message cell for cell.
  values(): number[][] {
    return this.cells.map((row) => row.map((cell) => Number(cell.dataset.value)));
  }
}
