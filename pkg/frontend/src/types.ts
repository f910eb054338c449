// Wire types for the trial service JSON protocol.

export interface SessionParams {
  exposure_ms: number;
  filter?: {
    classes?: number[];
    proportions?: number[];
    kinds?: string[];
    splits?: string[];
    length?: number;
  };
  seed?: number;
}

export interface SessionInfo {
  session_id: string;
  exposure_ms: number;
  total: number;
  choices: number[];
  created_at: number;
}

export interface StimulusDescriptor {
  done: false;
  image_id: string;
  image_url: string;
  exposure_ms: number;
  choices: number[];
  index: number;
  total: number;
}

export interface EndOfSession {
  done: true;
  total: number;
  answered: number;
}

export type NextStimulus = StimulusDescriptor | EndOfSession;

export interface ResponseBody {
  image_id: string;
  chosen_label: number;
  response_ms: number;
  flash_ms: number;
}

export interface ResponseAck {
  ok: boolean;
  index: number;
  total: number;
  done: boolean;
}

export interface TrialRecord {
  image_id: string;
  chosen_label: number;
  response_ms: number;
  flash_ms: number;
  planned_frames: number;
  flash_deviation_ms: number;
}

export interface SessionSummary {
  session_id: string;
  completed: TrialRecord[];
  abandoned: string[];
  anticipations: number;
}
