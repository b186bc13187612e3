import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    proxy: {
      "/search": "http://127.0.0.1:8000",
      "/health": "http://127.0.0.1:8000",
      "/stats": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
  },
});
