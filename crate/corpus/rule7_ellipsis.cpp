int main() {
  int caught = 0;
  try {
    throw 'x';
  } catch (int) {
    caught = 1;
  } catch (...) {
    caught = 2;
  }
  assert(caught == 2);
  return 0;
}
// VERDICT: SUCCESSFUL
