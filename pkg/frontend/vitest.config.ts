import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // dual-path tests shell into the core CLI repeatedly
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
