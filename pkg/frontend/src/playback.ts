/**
 * Playback clock: trajectory data is 10 frames per second; the display
 * rate is configurable and independent of the data rate.
 */

export const DATA_FPS = 10;

export class PlaybackClock {
  private frame = 0;
  private playing = false;
  private carry = 0;

  constructor(
    public readonly totalFrames: number,
    public displayFps: number = DATA_FPS,
    public loop: boolean = true
  ) {}

  get current(): number {
    return Math.floor(this.frame);
  }

  get isPlaying(): boolean {
    return this.playing;
  }

  play(): void {
    this.playing = true;
  }

  pause(): void {
    this.playing = false;
  }

  seek(frame: number): void {
    this.frame = Math.max(0, Math.min(frame, this.totalFrames - 1));
  }

  /**
   * Advance by wall-clock `dtSeconds`.  One displayed second always covers
   * `displayFps` data frames, so displayFps = 10 is real time, 5 is half
   * speed, 20 double speed.
   */
  tick(dtSeconds: number): number {
    if (!this.playing) return this.current;
    this.frame += dtSeconds * this.displayFps;
    if (this.frame >= this.totalFrames) {
      if (this.loop) {
        this.frame = this.frame % this.totalFrames;
      } else {
        this.frame = this.totalFrames - 1;
        this.playing = false;
      }
    }
    return this.current;
  }
}
