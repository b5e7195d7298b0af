import type { BoardController } from './board.js';
import type { BoardState, GridSize } from './types.js';
import { GRID_SIZES } from './types.js';

const GRID_COLUMNS: Record<GridSize, number> = { 9: 3, 18: 6, 25: 5, 36: 6 };

function cardElement(
  doc: Document,
  caption: string,
  imageUrl: string | null,
  className: string,
): HTMLElement {
  const card = doc.createElement('div');
  card.className = className;
  if (imageUrl !== null) {
    const img = doc.createElement('img');
    img.src = imageUrl;
    img.alt = caption;
    card.appendChild(img);
  } else {
    const placeholder = doc.createElement('div');
    placeholder.className = 'placeholder';
    placeholder.textContent = caption.slice(0, 2).toUpperCase();
    card.appendChild(placeholder);
  }
  const label = doc.createElement('span');
  label.className = 'caption';
  label.textContent = caption;
  card.appendChild(label);
  return card;
}

/** Re-render the whole board into `root` from the controller state. */
export function renderBoard(root: HTMLElement, controller: BoardController): void {
  const doc = root.ownerDocument;
  const state: BoardState = controller.state;
  root.textContent = '';

  const banner = doc.createElement('div');
  banner.id = 'error-banner';
  banner.hidden = state.error === null;
  banner.textContent = state.error ?? '';
  root.appendChild(banner);

  const bar = doc.createElement('div');
  bar.id = 'sentence-bar';
  for (const cell of state.sentence) {
    bar.appendChild(cardElement(doc, cell.caption, cell.imageUrl, 'sentence-card'));
  }
  root.appendChild(bar);

  const controls = doc.createElement('div');
  controls.id = 'controls';
  const speak = doc.createElement('button');
  speak.id = 'speak';
  speak.textContent = 'Falar';
  speak.addEventListener('click', () => {
    const utterance = new SpeechSynthesisUtterance(controller.sentenceText());
    utterance.lang = 'pt-BR';
    window.speechSynthesis.speak(utterance);
  });
  controls.appendChild(speak);

  const undo = doc.createElement('button');
  undo.id = 'undo';
  undo.textContent = 'Desfazer';
  undo.addEventListener('click', () => void controller.undoLast());
  controls.appendChild(undo);

  const clear = doc.createElement('button');
  clear.id = 'clear';
  clear.textContent = 'Limpar';
  clear.addEventListener('click', () => void controller.clearSentence());
  controls.appendChild(clear);

  const sizeSelect = doc.createElement('select');
  sizeSelect.id = 'grid-size';
  for (const size of GRID_SIZES) {
    const option = doc.createElement('option');
    option.value = String(size);
    option.textContent = `${size} células`;
    option.selected = size === state.gridSize;
    sizeSelect.appendChild(option);
  }
  sizeSelect.addEventListener('change', () => {
    void controller.setGridSize(Number(sizeSelect.value) as GridSize);
  });
  controls.appendChild(sizeSelect);

  const modeToggle = doc.createElement('button');
  modeToggle.id = 'mode-toggle';
  modeToggle.textContent = state.mode === 'predictive' ? 'Modo: preditivo' : 'Modo: fixo';
  modeToggle.addEventListener('click', () => {
    void controller.setMode(state.mode === 'predictive' ? 'static' : 'predictive');
  });
  controls.appendChild(modeToggle);
  root.appendChild(controls);

  const grid = doc.createElement('div');
  grid.id = 'grid';
  grid.style.gridTemplateColumns = `repeat(${GRID_COLUMNS[state.gridSize]}, 1fr)`;
  // The grid always shows exactly gridSize cells; empty slots render as
  // disabled placeholders so the layout never jumps.
  for (let index = 0; index < state.gridSize; index += 1) {
    const cell = state.cells[index];
    if (cell === undefined) {
      const empty = doc.createElement('button');
      empty.className = 'cell empty';
      empty.disabled = true;
      grid.appendChild(empty);
      continue;
    }
    const button = doc.createElement('button');
    button.className = 'cell';
    button.dataset.token = cell.token;
    button.appendChild(cardElement(doc, cell.caption, cell.imageUrl, 'card'));
    button.addEventListener('click', () => void controller.selectCell(cell));
    grid.appendChild(button);
  }
  root.appendChild(grid);
}
