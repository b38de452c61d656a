/** Shared wire and editor types for the trajectory studio. */
export {};
