int main() {
  try {
    throw 5;
  } catch (int) {
    throw;
  }
  return 0;
}
// VERDICT: FAILED
// PROPERTY: uncaught exception
