import { defineConfig } from 'vitest/config';

// the e2e suite spawns the service on this port; giving happy-dom the
// same origin mirrors production, where the service serves the bundle
export const E2E_PORT = 8641;

export default defineConfig({
  test: {
    environment: 'happy-dom',
    environmentOptions: {
      happyDOM: { url: `http://127.0.0.1:${E2E_PORT}` },
    },
    include: ['test/**/*.test.ts'],
    testTimeout: 240000,
    hookTimeout: 120000,
  },
});
