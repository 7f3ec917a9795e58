import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 30_000,
    // Child processes, not worker threads: the session tests deliver
    // real OS signals, which only a process can receive.
    pool: "forks",
  },
});
