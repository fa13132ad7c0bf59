int main() {
  int *p = nullptr;
  if (nondet_bool())
    p = new int(1);
  int v = *p;
  delete p;
  return v;
}
// VERDICT: FAILED
// PROPERTY: dereference failure: NULL pointer
