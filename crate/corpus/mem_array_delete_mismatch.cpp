int main() {
  int *p = new int[3];
  p[0] = 1;
  delete p;
  return 0;
}
// VERDICT: FAILED
// PROPERTY: operator mismatch
