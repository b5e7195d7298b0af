export interface PredictionItem {
  token: string;
  caption: string;
  probability: number;
  image_url: string | null;
}

export interface PredictionResult {
  items: PredictionItem[];
  model_id: string;
  latency_ms: number;
}

export interface VocabularyItem {
  id: number;
  captions: string[];
  has_image: boolean;
}

export interface VocabularyPage {
  page: number;
  size: number;
  total: number;
  items: VocabularyItem[];
}

export interface HealthInfo {
  model_id: string;
  vocab_size: number;
  uptime: number;
}

export const GRID_SIZES = [9, 18, 25, 36] as const;
export type GridSize = (typeof GRID_SIZES)[number];

export type BoardMode = 'predictive' | 'static';

/** One card, either in the grid or in the sentence bar. */
export interface BoardCell {
  token: string;
  caption: string;
  imageUrl: string | null;
  probability: number | null;
}

export interface BoardState {
  sentence: BoardCell[];
  gridSize: GridSize;
  mode: BoardMode;
  cells: BoardCell[];
  error: string | null;
}
