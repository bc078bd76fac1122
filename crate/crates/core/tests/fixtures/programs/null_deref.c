/* Dereference a null pointer: the canonical illegal memory access. */
int main(void) {
    volatile int *p = (int *)0;
    return *p;
}
