void f(int v) throw(int, double) {
  if (v > 0)
    throw v;
}

int main() {
  int x = nondet_int();
  try {
    f(x);
  } catch (int e) {
    assert(e > 0);
  }
  return 0;
}
// VERDICT: SUCCESSFUL
