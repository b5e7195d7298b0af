import { LatestWins, type BoardService } from './api.js';
import type { BoardCell, BoardMode, BoardState, GridSize } from './types.js';

export interface BoardOptions {
  gridSize?: GridSize;
  mode?: BoardMode;
  onChange?: (state: BoardState) => void;
}

/**
 * Board state machine. Every sentence edit re-queries the service for the
 * new prefix with n = grid size; rapid edits supersede in-flight requests
 * (latest wins). Errors keep the last grid and surface a banner message.
 */
export class BoardController {
  private readonly service: BoardService;
  private readonly gate = new LatestWins();
  private readonly onChange: (state: BoardState) => void;
  private staticCells: BoardCell[] | null = null;

  state: BoardState;

  constructor(service: BoardService, options: BoardOptions = {}) {
    this.service = service;
    this.onChange = options.onChange ?? (() => undefined);
    this.state = {
      sentence: [],
      gridSize: options.gridSize ?? 36,
      mode: options.mode ?? 'predictive',
      cells: [],
      error: null,
    };
  }

  private emit(): void {
    this.onChange(this.state);
  }

  private prefix(): string[] {
    return this.state.sentence.map((cell) => cell.token);
  }

  /** Re-query predictions (or the static page) for the current sentence. */
  async refresh(): Promise<void> {
    if (this.state.mode === 'static') {
      const cells = await this.staticPage();
      this.state = { ...this.state, cells: cells.slice(0, this.state.gridSize), error: null };
      this.emit();
      return;
    }
    const prefix = this.prefix();
    const result = await this.gate.run((signal) =>
      this.service.predict(prefix, this.state.gridSize, signal),
    ).catch((error: unknown) => {
      // Service failure: keep the last grid, show a non-blocking banner.
      this.state = { ...this.state, error: String(error) };
      this.emit();
      return undefined;
    });
    if (result === undefined) return; // superseded or failed
    const cells = result.items.map((item) => ({
      token: item.token,
      caption: item.caption,
      imageUrl: this.service.imageUrl(item.image_url),
      probability: item.probability,
    }));
    this.state = { ...this.state, cells, error: null };
    this.emit();
  }

  private async staticPage(): Promise<BoardCell[]> {
    if (this.staticCells === null) {
      // Fixed baseline page: the first 36 vocabulary entries alphabetically.
      const page = await this.service.vocabulary(0, 200);
      this.staticCells = page.items
        .map((item) => ({
          token: String(item.id),
          caption: item.captions[0] ?? String(item.id),
          imageUrl: item.has_image
            ? this.service.imageUrl(`/pictograms/${item.id}/image`)
            : null,
          probability: null,
        }))
        .sort((a, b) => a.caption.localeCompare(b.caption))
        .slice(0, 36);
    }
    return this.staticCells;
  }

  async selectCell(cell: BoardCell): Promise<void> {
    this.state = { ...this.state, sentence: [...this.state.sentence, cell] };
    this.emit();
    await this.refresh();
  }

  async undoLast(): Promise<void> {
    if (this.state.sentence.length === 0) return;
    this.state = { ...this.state, sentence: this.state.sentence.slice(0, -1) };
    this.emit();
    await this.refresh();
  }

  async clearSentence(): Promise<void> {
    this.state = { ...this.state, sentence: [] };
    this.emit();
    await this.refresh();
  }

  async setGridSize(size: GridSize): Promise<void> {
    this.state = { ...this.state, gridSize: size };
    this.emit();
    await this.refresh();
  }

  async setMode(mode: BoardMode): Promise<void> {
    this.state = { ...this.state, mode };
    this.emit();
    await this.refresh();
  }

  /** Current sentence as a speakable string (captions joined). */
  sentenceText(): string {
    return this.state.sentence.map((cell) => cell.caption).join(' ');
  }
}
