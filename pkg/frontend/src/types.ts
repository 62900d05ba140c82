/** JSON shapes exchanged with the identification service. */

export interface SpeakerResult {
  rank: number;
  speaker_id: string;
  display_name: string;
  score: number;
  video_id: string;
  clip_start_s: number;
  clip_end_s: number;
  video_url: string;
}

export interface IdentifyResponse {
  request_id: string;
  results: SpeakerResult[];
  timing: Record<string, number>;
}

export interface HealthResponse {
  status: "ok" | "loading";
  model_version: number;
  gallery_size: number;
  num_speakers: number;
  methods: string[];
  uptime_s: number;
}
