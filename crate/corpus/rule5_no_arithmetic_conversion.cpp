int main() {
  try {
    throw 1;
  } catch (double) {
    return 1;
  }
  return 0;
}
// VERDICT: FAILED
// PROPERTY: uncaught exception
