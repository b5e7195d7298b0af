import { PredictionClient } from './api.js';
import { BoardController } from './board.js';
import { renderBoard } from './render.js';
import type { GridSize } from './types.js';
import { GRID_SIZES } from './types.js';

function configFromLocation(): { serviceUrl: string; gridSize: GridSize } {
  const params = new URLSearchParams(window.location.search);
  const serviceUrl = params.get('service') ?? 'http://127.0.0.1:8000';
  const requested = Number(params.get('grid') ?? 36);
  const gridSize = (GRID_SIZES as readonly number[]).includes(requested)
    ? (requested as GridSize)
    : 36;
  return { serviceUrl, gridSize };
}

export function bootstrap(root: HTMLElement): BoardController {
  const { serviceUrl, gridSize } = configFromLocation();
  const client = new PredictionClient(serviceUrl);
  const controller = new BoardController(client, {
    gridSize,
    onChange: () => renderBoard(root, controller),
  });
  void controller.refresh();
  return controller;
}

const rootElement = document.getElementById('board');
if (rootElement !== null) {
  bootstrap(rootElement);
}
