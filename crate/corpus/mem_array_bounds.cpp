int main() {
  int n = nondet_int();
  int *a = new int[4];
  if (n >= 0 && n <= 4)
    a[n] = 1;
  delete[] a;
  return 0;
}
// VERDICT: FAILED
// PROPERTY: dereference failure: array bounds violated
