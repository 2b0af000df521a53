import { describe, expect, it } from "vitest";

import { DATA_FPS, PlaybackClock } from "../src/playback.js";

describe("PlaybackClock", () => {
  it("advances one data frame per tenth of a second at the data rate", () => {
    const clock = new PlaybackClock(64, DATA_FPS);
    clock.play();
    expect(clock.tick(0.1)).toBe(1);
    expect(clock.tick(0.1)).toBe(2);
  });

  it("maps 10 data-fps onto a configurable display rate", () => {
    const half = new PlaybackClock(64, 5);
    half.play();
    half.tick(1.0);
    expect(half.current).toBe(5); // half speed: 1 s of wall clock = 5 frames

    const double = new PlaybackClock(64, 20);
    double.play();
    double.tick(1.0);
    expect(double.current).toBe(20); // double speed
  });

  it("does not advance while paused and seeks within bounds", () => {
    const clock = new PlaybackClock(64);
    expect(clock.tick(1.0)).toBe(0);
    clock.seek(500);
    expect(clock.current).toBe(63);
    clock.seek(-3);
    expect(clock.current).toBe(0);
  });

  it("loops by default and stops at the end when loop is off", () => {
    const looping = new PlaybackClock(10, 10);
    looping.play();
    looping.tick(1.05);
    expect(looping.current).toBe(0);

    const once = new PlaybackClock(10, 10, false);
    once.play();
    once.tick(5.0);
    expect(once.current).toBe(9);
    expect(once.isPlaying).toBe(false);
  });
});
