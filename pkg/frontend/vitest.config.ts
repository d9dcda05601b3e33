import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the live suite spawns a real server per block; give it room
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
