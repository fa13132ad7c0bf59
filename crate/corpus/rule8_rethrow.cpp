void inner() {
  try {
    throw 42;
  } catch (int) {
    throw;
  }
}

int main() {
  try {
    inner();
  } catch (int e) {
    assert(e == 42);
  }
  return 0;
}
// VERDICT: SUCCESSFUL
